"""The command-line interface: run, audit, modelcheck."""

import json
import os

from bftledger.cli import main

SCENARIOS = os.path.join(os.path.dirname(__file__), os.pardir, "scenarios")


def scenario_path(name):
    return os.path.join(SCENARIOS, f"{name}.json")


def test_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "out"
    code = main([
        "run", "--scenario", scenario_path("transfers"), "--out", str(out),
    ])
    assert code == 0
    assert (out / "trace.bin").stat().st_size > 0
    assert (out / "report.txt").exists()
    for i in range(4):
        assert (out / f"snapshot_auth_{i}.txt").exists()
    stdout = capsys.readouterr().out
    assert "PASS conservation" in stdout


def test_run_json_format(capsys):
    code = main([
        "run", "--scenario", scenario_path("transfers"), "--format", "json",
    ])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["name"] == "transfers"
    assert all(a["passed"] for a in payload["audits"])


def test_run_seed_override_changes_trace(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    main(["run", "--scenario", scenario_path("transfers"), "--out", str(out1), "--seed", "1"])
    main(["run", "--scenario", scenario_path("transfers"), "--out", str(out2), "--seed", "2"])
    assert (out1 / "trace.bin").read_bytes() != (out2 / "trace.bin").read_bytes()


def test_audit_command(capsys):
    code = main(["audit", "--scenario", scenario_path("partition_heal")])
    assert code == 0
    stdout = capsys.readouterr().out
    assert "PASS eventual_consistency" in stdout


def test_modelcheck_command(capsys):
    code = main(["modelcheck", "--rounds", "1", "--byzantine", "1", "--format", "json"])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["baseline"]["violation"] is False


def test_modelcheck_ablation_exit_code(capsys):
    # an ablated rule that still finds a violation is the expected outcome
    code = main(["modelcheck", "--rounds", "1", "--byzantine", "0", "--ablate", "a"])
    assert code == 0
    assert "VIOLATION" in capsys.readouterr().out


def test_bad_scenario_rejected(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"version": 99}))
    code = main(["run", "--scenario", str(bad)])
    assert code == 2
    assert "ConfigError" in capsys.readouterr().err
