"""Bundled offline scenarios.

Each scenario directory carries a run config, a scripted-provider file and a
prompt; together with the fixture structures and search corpus they replay a
complete workflow run with no network access. ${work_dir} placeholders in
prompts and scripts resolve to the run's output directory, which is how
static fixtures can reference absolute file paths.
"""
from __future__ import annotations

import json
import shutil
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .bundled import fixtures_root, scenarios_dir
from .runner import RunConfig, RunOutcome, execute_run, load_run_config


class UnknownScenario(Exception):
    pass


@dataclass
class Scenario:
    name: str
    description: str
    directory: Path
    config: RunConfig
    prompt_file: str
    materialize: list[dict]

    def prompt_text(self) -> str:
        return (self.directory / self.prompt_file).read_text(encoding="utf-8")


def scenario_names() -> list[str]:
    root = scenarios_dir()
    if not root.is_dir():
        return []
    return sorted(p.name for p in root.iterdir() if (p / "config.json").is_file())


def load_scenario(name: str) -> Scenario:
    directory = scenarios_dir() / name
    config_path = directory / "config.json"
    if not config_path.is_file():
        raise UnknownScenario(f"no such scenario: {name}")
    raw = json.loads(config_path.read_text(encoding="utf-8"))
    return Scenario(
        name=name,
        description=raw.get("description", ""),
        directory=directory,
        config=load_run_config(config_path),
        prompt_file=raw.get("prompt_file", "prompt.txt"),
        materialize=raw.get("materialize", []),
    )


def list_scenarios() -> list[Scenario]:
    return [load_scenario(name) for name in scenario_names()]


def run_scenario(name: str, output_dir: Optional[Path] = None) -> RunOutcome:
    """Execute a bundled scenario end to end, offline."""
    scenario = load_scenario(name)
    if output_dir is None:
        stamp = time.strftime("%Y%m%dT%H%M%SZ", time.gmtime())
        output_dir = Path.cwd() / "scenario_runs" / f"{name}-{stamp}"
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for entry in scenario.materialize:
        src = fixtures_root() / entry["fixture"]
        dest = out / entry["dest"]
        dest.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(src, dest)
    return execute_run(scenario.config, scenario.prompt_text(), output_dir=out)
