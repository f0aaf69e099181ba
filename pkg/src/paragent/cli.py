"""Command-line frontend.

Subcommands: `run` executes a prompt through a configured workflow, `plot`
renders a timeline CSV to SVG, `scenarios` lists or replays the bundled
offline scenarios. Exit codes: 0 clean run, 1 configuration or I/O error,
2 guard violation, 3 truncated run.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .executor import ConfigInvalid
from .graph import GraphError
from .llm import ProviderError
from .plotting import MalformedTimeline, plot_timeline
from .runner import ConfigError, RunOutcome, execute_run, load_run_config
from .scenarios import UnknownScenario, list_scenarios, run_scenario
from .tools import FilesystemError

_RUN_ERRORS = (ConfigError, ConfigInvalid, ProviderError, GraphError,
               FilesystemError, OSError)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, args.prompt, args.prompt_file, args.output_dir)
    if args.command == "plot":
        return cmd_plot(args.timeline_csv, args.dest_svg)
    if args.command == "scenarios":
        if args.scenario_command == "list":
            return cmd_scenarios_list()
        return cmd_scenarios_run(args.name, args.output_dir)
    parser.error("unknown command")
    return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="paragent",
        description="Run LLM agent workflows with parallel tool execution.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a prompt through a configured workflow")
    run_p.add_argument("--config", required=True, help="path to the run config JSON")
    prompt_group = run_p.add_mutually_exclusive_group(required=True)
    prompt_group.add_argument("--prompt", help="prompt text")
    prompt_group.add_argument("--prompt-file", help="file containing the prompt text")
    run_p.add_argument("--output-dir", help="override the config output_dir")

    plot_p = sub.add_parser("plot", help="render a timeline CSV as a static SVG")
    plot_p.add_argument("timeline_csv")
    plot_p.add_argument("dest_svg")

    sc_p = sub.add_parser("scenarios", help="list or run the bundled offline scenarios")
    sc_sub = sc_p.add_subparsers(dest="scenario_command", required=True)
    sc_sub.add_parser("list", help="list available scenarios")
    sc_run = sc_sub.add_parser("run", help="run one scenario end to end")
    sc_run.add_argument("name")
    sc_run.add_argument("--output-dir", help="where to write the scenario outputs")
    return parser


def cmd_run(config_path, prompt, prompt_file, output_dir) -> int:
    try:
        cfg = load_run_config(config_path)
        if prompt_file is not None:
            prompt = Path(prompt_file).read_text(encoding="utf-8")
        outcome = execute_run(cfg, prompt,
                              output_dir=Path(output_dir) if output_dir else None)
    except _RUN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _report(outcome)
    return outcome.exit_code


def cmd_plot(timeline_csv, dest_svg) -> int:
    try:
        plot_timeline(timeline_csv, dest_svg)
    except (MalformedTimeline, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(dest_svg)
    return 0


def cmd_scenarios_list() -> int:
    for scenario in list_scenarios():
        print(f"{scenario.name}: {scenario.description}")
    return 0


def cmd_scenarios_run(name, output_dir) -> int:
    try:
        outcome = run_scenario(name, Path(output_dir) if output_dir else None)
    except UnknownScenario as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except _RUN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _report(outcome)
    return outcome.exit_code


def _report(outcome: RunOutcome) -> None:
    state = outcome.state
    print(f"run finished: iterations={state.iteration} truncated={state.truncated} "
          f"warnings={len(state.warnings)} run_dirs={len(outcome.run_dirs)}")
    for warning in state.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    print(f"outputs: {outcome.output_dir}")


if __name__ == "__main__":
    sys.exit(main())
