"""Command-line entry point: argument handling, exit codes, artifacts.

main() is exercised in process; one smoke test goes through the installed
console script.
"""

import json
import subprocess
import sys

import pytest

from cbfseq.cli import main

from test_harness import wall_dict


def _write_wall(tmp_path, **control_extra):
    d = wall_dict()
    d["control"].update(control_extra)
    p = tmp_path / "walled_goal.json"
    p.write_text(json.dumps(d))
    return p


def test_run_bundled_completes(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["run", "motivating_example", "--mode", "smooth", "--dt", "0.02", "--out", str(out)])
    assert code == 0
    stdout = capsys.readouterr().out
    assert "arrived at goal_a" in stdout
    assert "arrived at goal_b" in stdout
    assert "max control jump" in stdout
    for fname in (
        "trajectory.csv",
        "events.json",
        "control_vs_time.svg",
        "trajectory.svg",
        "alpha_vs_time.svg",
    ):
        assert (out / fname).is_file()
    payload = json.loads((out / "events.json").read_text())
    assert payload["completed"] is True
    rows = (out / "trajectory.csv").read_text().splitlines()
    assert len(rows) - 1 == int(round(payload["final_time"] / 0.02)) + 1


def test_default_output_directory(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    code = main(["run", "motivating_example", "--tmax", "1.0"])
    assert code == 3
    assert (tmp_path / "motivating_example_smooth" / "trajectory.csv").is_file()
    assert "tasks remaining" in capsys.readouterr().err


def test_unknown_scenario_name(tmp_path, capsys):
    code = main(["run", "no_such_scenario", "--out", str(tmp_path)])
    assert code == 1
    err = capsys.readouterr().err
    assert "error:" in err
    assert "no bundled scenario" in err


def test_invalid_json_file(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{ nope")
    assert main(["run", str(p), "--out", str(tmp_path / "o")]) == 1
    assert "invalid JSON" in capsys.readouterr().err


def test_schema_violation(tmp_path, capsys):
    d = wall_dict()
    d["control"].pop("fcbf")
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(d))
    assert main(["run", str(p), "--out", str(tmp_path / "o")]) == 1
    assert "missing required keys" in capsys.readouterr().err


def test_bad_override_rejected(tmp_path, capsys):
    code = main(["run", "motivating_example", "--dt", "-0.5", "--out", str(tmp_path)])
    assert code == 1
    assert "dt must be positive" in capsys.readouterr().err


def test_infeasible_writes_partial_log(tmp_path, capsys):
    p = _write_wall(tmp_path)
    out = tmp_path / "out"
    code = main(["run", str(p), "--mode", "discrete", "--out", str(out)])
    assert code == 2
    err = capsys.readouterr().err
    assert "infeasible" in err
    assert "partial log written" in err
    payload = json.loads((out / "events.json").read_text())
    assert payload["completed"] is False
    assert len(payload["infeasible"]) == 1
    assert (out / "trajectory.csv").is_file()
    assert (out / "trajectory.svg").is_file()


def test_slack_flag_continues_past_infeasibility(tmp_path):
    p = _write_wall(tmp_path)
    out = tmp_path / "out"
    code = main(
        ["run", str(p), "--mode", "discrete", "--slack-on-infeasible", "--out", str(out)]
    )
    assert code == 3  # runs to t_max, goal stays out of reach
    payload = json.loads((out / "events.json").read_text())
    assert payload["completed"] is False
    assert len(payload["infeasible"]) > 100
    assert all(ev["detail"] == "reachability rows relaxed" for ev in payload["infeasible"])


def test_timeout_exit_code(tmp_path, capsys):
    code = main(["run", "motivating_example", "--tmax", "2.0", "--out", str(tmp_path / "o")])
    assert code == 3
    assert "tasks remaining" in capsys.readouterr().err


def test_active_only_softmin_stalls_at_boundary(tmp_path, capsys):
    # with the softmin over active barriers only, the forcing vanishes as
    # h -> 0 and the goal is approached only asymptotically: no arrival
    out = tmp_path / "o"
    code = main(
        [
            "run",
            "motivating_example",
            "--active-only-softmin",
            "--tmax",
            "10.0",
            "--out",
            str(out),
        ]
    )
    assert code == 3
    assert "arrived" not in capsys.readouterr().out
    payload = json.loads((out / "events.json").read_text())
    assert payload["arrivals"] == []


def test_timing_flag_controls_csv_column(tmp_path):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    args = ["run", "motivating_example", "--tmax", "2.0"]
    assert main(args + ["--out", str(out_a)]) == 3
    assert main(args + ["--out", str(out_b), "--timing-in-csv"]) == 3
    rows_a = (out_a / "trajectory.csv").read_text().splitlines()[1:]
    rows_b = (out_b / "trajectory.csv").read_text().splitlines()[1:]
    assert all(r.rsplit(",", 1)[1] == "0.0" for r in rows_a)
    assert any(float(r.rsplit(",", 1)[1]) > 0.0 for r in rows_b)


def test_missing_subcommand_exits():
    with pytest.raises(SystemExit):
        main([])


def test_console_script_help():
    proc = subprocess.run(
        [sys.executable, "-m", "cbfseq.cli", "--help"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert "cbfseq" in proc.stdout

    proc = subprocess.run(["cbfseq", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "run" in proc.stdout
