import json
import time

from paragent.bundled import scenarios_dir, structures_dir
from paragent.cli import main
from paragent.executor import Executor, ResourceConfig, wait_all
from paragent.graph import Message
from paragent.runner import load_messages


def write_run_setup(tmp_path, n_runs=2, max_iterations=25):
    """A minimal wf1 config + script pair for fast CLI runs."""
    structure = structures_dir() / "2KKJ.pdb"
    script = [
        {"match": {"contains": "simulate"},
         "response": {"content": "starting",
                      "tool_calls": [{"name": "run_md", "arguments": {
                          "structure_path": str(structure), "temperature": 313,
                          "length_ps": 0.02, "seed": 30 ^ i}} for i in range(n_runs)]}},
        {"match": {"contains": "simulation finished"},
         "response": {"content": "done"}},
    ]
    (tmp_path / "script.json").write_text(json.dumps(script))
    config = {
        "provider": {"kind": "scripted", "script_path": "script.json"},
        "resources": {"backend": "local", "nodes": 1, "workers_per_node": 2},
        "workflow": {"workflow": "wf1", "scheme": "parallel_node"},
        "seed": 30,
        "max_iterations": max_iterations,
    }
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config))
    return config_path


class TestCmdRun:
    def test_missing_config_exits_1(self, tmp_path, capsys):
        code = main(["run", "--config", str(tmp_path / "nope.json"),
                     "--prompt", "hello"])
        assert code == 1
        assert "error" in capsys.readouterr().err

    def test_invalid_config_exits_1(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"provider": {"kind": "http"}}))
        assert main(["run", "--config", str(bad), "--prompt", "x"]) == 1

    def test_happy_path_writes_all_outputs(self, tmp_path):
        config_path = write_run_setup(tmp_path)
        out = tmp_path / "out"
        code = main(["run", "--config", str(config_path),
                     "--prompt", "please simulate 2KKJ twice",
                     "--output-dir", str(out)])
        assert code == 0
        assert (out / "messages.json").is_file()
        assert (out / "warnings.json").is_file()
        assert (out / "timeline.csv").is_file()
        assert (out / "timeline.svg").is_file()
        assert len(list((out / "runs").iterdir())) == 2
        assert json.loads((out / "warnings.json").read_text()) == []

    def test_messages_json_round_trips(self, tmp_path):
        config_path = write_run_setup(tmp_path)
        out = tmp_path / "out"
        main(["run", "--config", str(config_path), "--prompt", "simulate it",
              "--output-dir", str(out)])
        raw = json.loads((out / "messages.json").read_text())
        messages, meta = load_messages(out / "messages.json")
        assert [m.to_dict() for m in messages] == raw["messages"]
        assert isinstance(messages[0], Message)
        assert messages[0].role == "user"
        assert meta["truncated"] is False

    def test_prompt_file(self, tmp_path):
        config_path = write_run_setup(tmp_path)
        prompt_file = tmp_path / "prompt.txt"
        prompt_file.write_text("simulate the structure\n")
        out = tmp_path / "out"
        code = main(["run", "--config", str(config_path),
                     "--prompt-file", str(prompt_file), "--output-dir", str(out)])
        assert code == 0

    def test_truncated_run_exits_3(self, tmp_path):
        config_path = write_run_setup(tmp_path, max_iterations=2)
        out = tmp_path / "out"
        code = main(["run", "--config", str(config_path),
                     "--prompt", "simulate forever", "--output-dir", str(out)])
        assert code == 3
        meta = json.loads((out / "messages.json").read_text())
        assert meta["truncated"] is True

    def test_guard_violation_exits_2(self, tmp_path):
        scenario = scenarios_dir() / "scenario-4-k5"
        out = tmp_path / "out"
        code = main(["run", "--config", str(scenario / "config.json"),
                     "--prompt-file", str(scenario / "prompt.txt"),
                     "--output-dir", str(out)])
        assert code == 2
        warnings = json.loads((out / "warnings.json").read_text())
        assert any(w["kind"] == "guard_violation" for w in warnings)

    def test_cap_scenario_records_under_provisioning(self, tmp_path):
        scenario = scenarios_dir() / "scenario-5-cap24"
        out = tmp_path / "out"
        code = main(["run", "--config", str(scenario / "config.json"),
                     "--prompt-file", str(scenario / "prompt.txt"),
                     "--output-dir", str(out)])
        assert code == 0
        warnings = json.loads((out / "warnings.json").read_text())
        assert {"kind": "under_provisioned", "tool": "run_md",
                "requested": 100, "dispatched": 24} in warnings
        assert len(list((out / "runs").iterdir())) == 24


def make_timeline_csv(tmp_path, tasks=8, workers=4, duration=0.04):
    ex = Executor.start(ResourceConfig(backend="local", nodes=1,
                                       workers_per_node=workers))
    wait_all([ex.submit(time.sleep, duration) for _ in range(tasks)])
    ex.shutdown()
    return ex.export_timeline(tmp_path / "timeline.csv")


class TestCmdPlot:
    def test_renders_svg_with_peak_from_csv(self, tmp_path):
        csv_path = make_timeline_csv(tmp_path)
        rows = [line.split(",") for line in
                csv_path.read_text().strip().splitlines()[1:]]
        assert max(int(r[2]) for r in rows) == 4  # oracle: peak read from the CSV
        svg = tmp_path / "timeline.svg"
        assert main(["plot", str(csv_path), str(svg)]) == 0
        body = svg.read_text()
        assert body.lstrip().startswith("<?xml")
        assert "running workers" in body and "pending tasks" in body

    def test_deterministic_output(self, tmp_path):
        csv_path = make_timeline_csv(tmp_path, tasks=4, workers=2)
        a, b = tmp_path / "a.svg", tmp_path / "b.svg"
        assert main(["plot", str(csv_path), str(a)]) == 0
        assert main(["plot", str(csv_path), str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_empty_run_flat_series(self, tmp_path):
        ex = Executor.start(ResourceConfig(workers_per_node=2))
        ex.shutdown()
        csv_path = ex.export_timeline(tmp_path / "idle.csv")
        assert main(["plot", str(csv_path), str(tmp_path / "idle.svg")]) == 0

    def test_broken_conservation_names_row(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("t_ms,pending,running,completed,workers_busy,workers_total\n"
                       "0,2,0,0,0,4\n"
                       "5,1,1,0,2,4\n")  # workers_busy != running on row 2
        assert main(["plot", str(bad), str(tmp_path / "x.svg")]) == 1
        assert "row 2" in capsys.readouterr().err

    def test_bad_header_rejected(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("time,queued\n1,2\n")
        assert main(["plot", str(bad), str(tmp_path / "x.svg")]) == 1

    def test_missing_file(self, tmp_path):
        assert main(["plot", str(tmp_path / "ghost.csv"),
                     str(tmp_path / "x.svg")]) == 1


class TestCmdScenarios:
    def test_list_names_the_five_canonical_scenarios(self, capsys):
        assert main(["scenarios", "list"]) == 0
        out = capsys.readouterr().out
        for name in ["scenario-1", "scenario-2", "scenario-3", "scenario-4",
                     "scenario-5"]:
            assert f"{name}:" in out

    def test_unknown_scenario_exits_1(self, tmp_path, capsys):
        assert main(["scenarios", "run", "scenario-nope",
                     "--output-dir", str(tmp_path)]) == 1
        assert "scenario-nope" in capsys.readouterr().err

    def test_run_guard_scenario_propagates_exit_code(self, tmp_path):
        code = main(["scenarios", "run", "scenario-4-k5",
                     "--output-dir", str(tmp_path / "out")])
        assert code == 2
        assert (tmp_path / "out" / "timeline.svg").is_file()
