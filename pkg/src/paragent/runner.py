"""Run configuration and the end-to-end run driver.

A run config is a single JSON document selecting the provider (scripted or
http), the execution resources, the workflow and dispatch scheme, and the
structure/search backends (fixture directories by default, so every bundled
scenario runs with no network access). Executing a run writes messages.json,
warnings.json, timeline.csv and timeline.svg into the output directory,
alongside the per-simulation run directories.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .bundled import corpus_dir, structures_dir
from .executor import ConfigInvalid, Executor, ResourceConfig
from .graph import GraphState, Message
from .llm import HttpProvider, ScriptedProvider, parse_script
from .plotting import plot_timeline
from .tools import (FixturePdbSource, FixtureSearchBackend, HttpPdbSource,
                    HttpSearchBackend)
from .workflows import WorkflowConfig, build_workflow1, build_workflow2

WORK_DIR_TOKEN = "${work_dir}"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_GUARD = 2
EXIT_TRUNCATED = 3


class ConfigError(Exception):
    pass


@dataclass
class ProviderConfig:
    kind: str  # scripted | http
    script_path: Optional[str] = None
    base_url: Optional[str] = None
    model: Optional[str] = None
    max_parallel_tool_calls: Optional[int] = None

    def validate(self) -> None:
        if self.kind == "scripted":
            if not self.script_path:
                raise ConfigError("scripted provider requires script_path")
        elif self.kind == "http":
            if not self.base_url or not self.model:
                raise ConfigError("http provider requires base_url and model")
        else:
            raise ConfigError(f"unknown provider kind {self.kind!r}")


@dataclass
class WorkflowSettings:
    workflow: str = "wf1"
    scheme: str = "parallel_node"
    search_k: int = 5
    requested_structures_guard: bool = True


@dataclass
class BackendChoice:
    kind: str = "fixture"  # fixture | http
    path: Optional[str] = None
    base_url: Optional[str] = None


@dataclass
class RunConfig:
    provider: ProviderConfig
    resources: ResourceConfig
    workflow: WorkflowSettings
    output_dir: Optional[str] = None
    cost_scale: float = 0.0
    seed: int = 0
    max_iterations: int = 25
    pdb_backend: BackendChoice = field(default_factory=BackendChoice)
    search_backend: BackendChoice = field(default_factory=BackendChoice)
    config_dir: Path = field(default_factory=Path.cwd)


def load_run_config(path) -> RunConfig:
    """Load and validate a run config document."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_run_config(data, config_dir=path.parent)


def parse_run_config(data: dict, config_dir: Optional[Path] = None) -> RunConfig:
    try:
        provider = ProviderConfig(**data.get("provider", {}))
        provider.validate()
        resources = ResourceConfig.from_dict(data.get("resources", {}))
        workflow = WorkflowSettings(**data.get("workflow", {}))
        pdb_backend = BackendChoice(**data.get("pdb_backend", {}))
        search_backend = BackendChoice(**data.get("search_backend", {}))
    except (TypeError, ConfigInvalid) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc
    return RunConfig(
        provider=provider,
        resources=resources,
        workflow=workflow,
        output_dir=data.get("output_dir"),
        cost_scale=float(data.get("cost_scale", 0.0)),
        seed=int(data.get("seed", 0)),
        max_iterations=int(data.get("max_iterations", 25)),
        pdb_backend=pdb_backend,
        search_backend=search_backend,
        config_dir=config_dir or Path.cwd(),
    )


@dataclass
class RunOutcome:
    state: GraphState
    exit_code: int
    output_dir: Path
    messages_path: Path
    warnings_path: Path
    timeline_csv: Path
    timeline_svg: Path

    @property
    def run_dirs(self) -> list[Path]:
        runs = self.output_dir / "runs"
        return sorted(p for p in runs.iterdir() if p.is_dir()) if runs.is_dir() else []


def _build_provider(cfg: RunConfig, work_dir: str):
    if cfg.provider.kind == "scripted":
        script_path = Path(cfg.provider.script_path)
        if not script_path.is_absolute():
            script_path = cfg.config_dir / script_path
        try:
            text = script_path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read script {script_path}: {exc}") from exc
        entries = parse_script(text.replace(WORK_DIR_TOKEN, work_dir))
        return ScriptedProvider(entries,
                                max_parallel_tool_calls=cfg.provider.max_parallel_tool_calls,
                                model=cfg.provider.model or "scripted")
    return HttpProvider(base_url=cfg.provider.base_url, model=cfg.provider.model,
                        max_parallel_tool_calls=cfg.provider.max_parallel_tool_calls)


def _build_pdb_source(choice: BackendChoice):
    if choice.kind == "fixture":
        return FixturePdbSource(choice.path or structures_dir())
    if choice.kind == "http":
        return HttpPdbSource(choice.base_url) if choice.base_url else HttpPdbSource()
    raise ConfigError(f"unknown pdb backend kind {choice.kind!r}")


def _build_search_backend(choice: BackendChoice):
    if choice.kind == "fixture":
        return FixtureSearchBackend(choice.path or corpus_dir())
    if choice.kind == "http":
        if not choice.base_url:
            raise ConfigError("http search backend requires base_url")
        return HttpSearchBackend(choice.base_url)
    raise ConfigError(f"unknown search backend kind {choice.kind!r}")


def execute_run(cfg: RunConfig, prompt_text: str,
                output_dir: Optional[Path] = None) -> RunOutcome:
    """Run one prompt through the configured workflow and write all outputs.

    Exit code semantics: 0 clean, 2 a guard violation surfaced, 3 the run hit
    the iteration cap. Configuration problems raise before anything runs.
    """
    out = Path(output_dir) if output_dir is not None else (
        Path(cfg.output_dir) if cfg.output_dir else None)
    if out is None:
        raise ConfigError("output_dir must be set in the config or given explicitly")
    out.mkdir(parents=True, exist_ok=True)
    work_dir = str(out.resolve())

    provider = _build_provider(cfg, work_dir)
    executor = Executor.start(cfg.resources)
    try:
        wcfg = WorkflowConfig(
            workflow=cfg.workflow.workflow,
            scheme=cfg.workflow.scheme,
            provider=provider,
            executor=executor,
            work_dir=out,
            pdb_source=_build_pdb_source(cfg.pdb_backend),
            search_backend=_build_search_backend(cfg.search_backend),
            search_k=cfg.workflow.search_k,
            requested_structures_guard=cfg.workflow.requested_structures_guard,
            cost_scale=cfg.cost_scale,
            seed=cfg.seed,
        )
        build = build_workflow1 if cfg.workflow.workflow == "wf1" else build_workflow2
        graph = build(wcfg)
        prompt = prompt_text.replace(WORK_DIR_TOKEN, work_dir)
        state = graph.run(prompt, max_iterations=cfg.max_iterations)
    finally:
        executor.shutdown()

    timeline_csv = executor.export_timeline(out / "timeline.csv")
    timeline_svg = plot_timeline(timeline_csv, out / "timeline.svg")

    messages_path = out / "messages.json"
    messages_path.write_text(json.dumps({
        "messages": [m.to_dict() for m in state.messages],
        "iteration": state.iteration,
        "truncated": state.truncated,
    }, indent=2), encoding="utf-8")

    warnings_path = out / "warnings.json"
    warnings_path.write_text(json.dumps(state.warnings, indent=2), encoding="utf-8")

    if any(w.get("kind") == "guard_violation" for w in state.warnings):
        exit_code = EXIT_GUARD
    elif state.truncated:
        exit_code = EXIT_TRUNCATED
    else:
        exit_code = EXIT_OK

    return RunOutcome(
        state=state,
        exit_code=exit_code,
        output_dir=out,
        messages_path=messages_path,
        warnings_path=warnings_path,
        timeline_csv=timeline_csv,
        timeline_svg=timeline_svg,
    )


def load_messages(path) -> tuple[list[Message], dict]:
    """Round-trip loader for messages.json."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    messages = [Message.from_dict(m) for m in data["messages"]]
    return messages, {"iteration": data.get("iteration"), "truncated": data.get("truncated")}
