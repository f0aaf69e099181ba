"""Toy molecular-dynamics workload.

The heavy tool is a Langevin-thermostatted 1-D harmonic chain whose size is
taken from the ATOM/HETATM count of a parsed PDB file. It stands in for a
real MD engine while keeping the same argument surface (structure path,
temperature, length, timestep), per-run provenance (run directory, trajectory,
manifest) and cost scaling with system size.

REDUCED UNITS, LOUDLY: particle mass = 1, spring constant = 1, k_B = 1, and
one time unit = 1 ps (so a 2 fs timestep is dt = 0.002). The Kelvin number
from prompts is used verbatim as the reduced temperature. Nothing here is
physically meaningful beyond equipartition and energy conservation; the
workload exists to exercise scheduling, provenance and determinism.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numba
import numpy as np

from .llm import ParamSpec, ToolSchema
from .tools import ToolDef, ToolResult, make_run_dir

# The integrator chain is capped so one huge structure cannot stall a worker;
# the cost model still uses the full atom count, preserving imbalance ratios.
CHAIN_CAP = 10000

_SEED_MASK = (1 << 64) - 1


class EmptyStructure(Exception):
    pass


class FileUnreadable(Exception):
    pass


@dataclass
class StructureInfo:
    atom_count: int
    source_path: str
    id_hint: Optional[str] = None


def parse_structure(path) -> StructureInfo:
    """Count ATOM/HETATM records; malformed lines are skipped silently."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8", errors="replace")
    except OSError as exc:
        raise FileUnreadable(f"cannot read structure file {path}: {exc}") from exc
    count = 0
    for line in text.splitlines():
        if line[:6].strip() in ("ATOM", "HETATM"):
            count += 1
    if count == 0:
        raise EmptyStructure(f"{path} contains no ATOM/HETATM records")
    return StructureInfo(atom_count=count, source_path=str(path), id_hint=path.stem)


@dataclass
class SimulationSpec:
    """Parameters of one simulation job, as a tool call would supply them."""

    structure_path: str
    temperature: float
    length_ps: float
    seed: int
    timestep_fs: float = 2.0
    friction_per_ps: float = 1.0
    report_interval_steps: int = 100

    @property
    def steps(self) -> int:
        return int(round(self.length_ps * 1000.0 / self.timestep_fs))

    @property
    def frames(self) -> int:
        return self.steps // self.report_interval_steps

    def validate(self) -> None:
        if self.temperature <= 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if self.length_ps <= 0:
            raise ValueError(f"length_ps must be positive, got {self.length_ps}")
        if self.timestep_fs <= 0:
            raise ValueError(f"timestep_fs must be positive, got {self.timestep_fs}")
        if self.friction_per_ps < 0:
            raise ValueError(f"friction_per_ps must be >= 0, got {self.friction_per_ps}")
        if self.report_interval_steps < 1:
            raise ValueError("report_interval_steps must be >= 1")
        if self.steps < 1:
            raise ValueError(f"length {self.length_ps} ps at {self.timestep_fs} fs rounds to 0 steps")

    def to_dict(self) -> dict:
        return {
            "structure_path": self.structure_path,
            "temperature": self.temperature,
            "length_ps": self.length_ps,
            "seed": self.seed,
            "timestep_fs": self.timestep_fs,
            "friction_per_ps": self.friction_per_ps,
            "report_interval_steps": self.report_interval_steps,
        }


@dataclass
class SimResult:
    run_dir: str
    trajectory_path: str
    frames: int
    wall_ms: float
    mean_kinetic_per_dof: float
    status: str = "ok"
    manifest_path: str = ""


@numba.njit(cache=True, nogil=True)
def _baoab_chunk(x, v, forces, noise, dt, c1, c2, step0, report_interval,
                 half_start, pot_out, kin_out, acc):
    """Advance the chain by noise.shape[0] BAOAB steps starting after step0.

    acc[0]/acc[1] accumulate kinetic-energy sums/samples for steps past
    half_start; pot_out/kin_out are filled at report steps. Nearest-neighbour
    springs with free ends: U = 0.5 * sum (x[i+1]-x[i])^2.
    """
    n = x.shape[0]
    half = 0.5 * dt
    for t in range(noise.shape[0]):
        step = step0 + t + 1
        for i in range(n):
            v[i] += half * forces[i]
            x[i] += half * v[i]
        for i in range(n):
            v[i] = c1 * v[i] + c2 * noise[t, i]
            x[i] += half * v[i]
        for i in range(n):
            forces[i] = 0.0
        for i in range(n - 1):
            d = x[i + 1] - x[i]
            forces[i] += d
            forces[i + 1] -= d
        for i in range(n):
            v[i] += half * forces[i]
        if step > half_start:
            ke = 0.0
            for i in range(n):
                ke += v[i] * v[i]
            acc[0] += 0.5 * ke
            acc[1] += 1.0
        if step % report_interval == 0:
            idx = step // report_interval - 1
            if 0 <= idx < pot_out.shape[0]:
                pe = 0.0
                for i in range(n - 1):
                    d = x[i + 1] - x[i]
                    pe += d * d
                pot_out[idx] = 0.5 * pe
                ke = 0.0
                for i in range(n):
                    ke += v[i] * v[i]
                kin_out[idx] = 0.5 * ke


def simulate_cost_model(atom_count: int, steps: int, cost_scale: float = 0.0) -> float:
    """Modeled duration (seconds) of a run: cost_scale x atoms x steps.

    Linear in system size, so two structures finish in proportion to their
    atom counts; at cost_scale=0 the workload is pure compute.
    """
    if atom_count < 1 or steps < 1:
        raise ValueError("atom_count and steps must be positive")
    if cost_scale < 0:
        raise ValueError("cost_scale must be >= 0")
    return cost_scale * atom_count * steps


def run_simulation(spec: SimulationSpec, base_dir, cost_scale: float = 0.0) -> SimResult:
    """Run one simulation in a fresh run directory under base_dir.

    Deterministic for a given spec+seed: velocities are the first draw from
    the seeded generator, thermostat noise the rest, so trajectories are
    byte-identical across repeats. Only wall_ms and the directory name vary.
    """
    spec.validate()
    info = parse_structure(spec.structure_path)
    t_start = time.perf_counter()
    run_dir = make_run_dir(base_dir)

    n = min(info.atom_count, CHAIN_CAP)
    steps = spec.steps
    dt = spec.timestep_fs * 1e-3
    c1 = float(np.exp(-spec.friction_per_ps * dt))
    c2 = float(np.sqrt(max(0.0, 1.0 - c1 * c1) * spec.temperature))

    rng = np.random.default_rng(spec.seed & _SEED_MASK)
    x = np.zeros(n)
    v = rng.normal(0.0, np.sqrt(spec.temperature), n)
    forces = np.zeros(n)

    frames = spec.frames
    pot = np.zeros(frames)
    kin = np.zeros(frames)
    acc = np.zeros(2)
    half_start = steps // 2

    chunk = max(1, min(steps, 4_000_000 // n))
    done = 0
    while done < steps:
        m = min(chunk, steps - done)
        if c2 > 0.0:
            noise = rng.normal(0.0, 1.0, (m, n))
        else:
            noise = np.zeros((m, n))
        _baoab_chunk(x, v, forces, noise, dt, c1, c2, done,
                     spec.report_interval_steps, half_start, pot, kin, acc)
        done += m

    modeled = simulate_cost_model(info.atom_count, steps, cost_scale)
    if modeled > 0:
        time.sleep(modeled)

    mean_ke_dof = float(acc[0] / (acc[1] * n)) if acc[1] > 0 else 0.0

    traj_path = run_dir / "trajectory.csv"
    with open(traj_path, "w", encoding="utf-8") as fh:
        fh.write("step,potential,kinetic\n")
        for i in range(frames):
            fh.write(f"{(i + 1) * spec.report_interval_steps},{float(pot[i])!r},{float(kin[i])!r}\n")

    wall_ms = (time.perf_counter() - t_start) * 1000.0
    manifest = {
        "spec": spec.to_dict(),
        "atom_count": info.atom_count,
        "chain_length": n,
        "result": {
            "frames": frames,
            "mean_kinetic_per_dof": mean_ke_dof,
            "status": "ok",
            "wall_ms": wall_ms,
        },
        "run_dir": str(run_dir),
        "trajectory": str(traj_path),
    }
    manifest_path = run_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")

    return SimResult(
        run_dir=str(run_dir),
        trajectory_path=str(traj_path),
        frames=frames,
        wall_ms=wall_ms,
        mean_kinetic_per_dof=mean_ke_dof,
        status="ok",
        manifest_path=str(manifest_path),
    )


RUN_MD_SCHEMA_PARAMS = {
    "structure_path": ParamSpec("string", "absolute path of the input PDB file", required=True),
    "temperature": ParamSpec("number", "simulation temperature in K", required=True),
    "length_ps": ParamSpec("number", "simulation length in picoseconds", required=True),
    "timestep_fs": ParamSpec("number", "integration timestep in femtoseconds (default 2)"),
    "friction_per_ps": ParamSpec("number", "thermostat friction per picosecond (default 1)"),
    "seed": ParamSpec("integer", "random seed for reproducible runs"),
    "report_interval_steps": ParamSpec("integer", "steps between trajectory rows (default 100)"),
    "requested_runs": ParamSpec("integer",
                                "total number of runs the task asked for; used to detect "
                                "under-provisioned tool-call batches"),
}


def make_run_md_tool(base_dir, cost_scale: float = 0.0, default_seed: int = 0) -> ToolDef:
    """Build the run_md tool writing run directories under base_dir."""
    schema = ToolSchema(
        name="run_md",
        description="Run one molecular-dynamics simulation of the given structure and "
                    "return its trajectory location.",
        parameters=dict(RUN_MD_SCHEMA_PARAMS),
    )

    def behavior(args: dict) -> ToolResult:
        args = dict(args)
        args.pop("requested_runs", None)
        seed = int(args.pop("seed", default_seed))
        spec = SimulationSpec(seed=seed, **args)
        result = run_simulation(spec, base_dir, cost_scale=cost_scale)
        content = (f"simulation finished: frames={result.frames} "
                   f"mean_ke_per_dof={result.mean_kinetic_per_dof:.6g} "
                   f"trajectory={result.trajectory_path}")
        return ToolResult(status="ok", content=content,
                          artifacts=[result.trajectory_path, result.manifest_path])

    return ToolDef(schema=schema, behavior=behavior, execution_class="parallel")


def load_manifest(run_dir) -> dict:
    return json.loads((Path(run_dir) / "manifest.json").read_text(encoding="utf-8"))


def comparable_manifest(manifest: dict) -> dict:
    """Strip the fields that legitimately differ between identical runs
    (wall time, directory names) for cross-scheme comparison."""
    trimmed = json.loads(json.dumps(manifest))
    trimmed.pop("run_dir", None)
    trimmed.pop("trajectory", None)
    trimmed.get("result", {}).pop("wall_ms", None)
    return trimmed
