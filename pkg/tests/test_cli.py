import json
import subprocess
import sys

import pytest

from autocal.calibrate import Budget
from autocal.cli import UsageError, main, parse_config
from autocal.engine import scenario_to_dict, trace_from_dict
from autocal.scenarios import template_scenario


def test_max_evals_flag():
    cfg = parse_config(["calibrate", "--algo", "random", "--max-evals", "100", "--seed", "3"])
    assert cfg.budget == Budget.evaluations(100)
    assert cfg.seed == 3 and cfg.algorithm == "random"


def test_defaults(monkeypatch):
    monkeypatch.delenv("AUTOCAL_WORKERS", raising=False)
    cfg = parse_config(["calibrate"])
    assert cfg.budget == Budget.wall_clock(21600)
    assert cfg.seed == 0
    assert 1 <= cfg.workers <= 40


def test_gddyn_sets_dynamic_delta():
    assert parse_config(["calibrate", "--algo", "gddyn"]).gd_config.dynamic_delta is True
    assert parse_config(["calibrate", "--algo", "gdfix"]).gd_config.dynamic_delta is False


def test_conflicting_budget_flags():
    with pytest.raises(UsageError):
        parse_config(["calibrate", "--max-evals", "5", "--time-budget", "10"])
    assert main(["calibrate", "--max-evals", "5", "--time-budget", "10"]) == 1


def test_unknown_flag_and_missing_file():
    assert main(["calibrate", "--bogus"]) == 1
    assert main(["calibrate", "--truth", "/no/such/truth.json"]) == 1
    assert main(["experiment", "table9"]) == 1


def test_config_file_precedence(tmp_path, monkeypatch):
    conf = tmp_path / "run.json"
    conf.write_text(json.dumps({"seed": 4, "workers": 3, "max_evals": 10, "algorithm": "grid"}))
    monkeypatch.delenv("AUTOCAL_WORKERS", raising=False)
    cfg = parse_config(["calibrate", "--config", str(conf)])
    assert (cfg.seed, cfg.workers, cfg.algorithm, cfg.budget) == (4, 3, "grid", Budget.evaluations(10))
    cfg = parse_config(["calibrate", "--config", str(conf), "--seed", "9", "--time-budget", "60"])
    assert cfg.seed == 9 and cfg.budget == Budget.wall_clock(60)
    monkeypatch.setenv("AUTOCAL_WORKERS", "2")
    assert parse_config(["calibrate", "--config", str(conf)]).workers == 2
    assert parse_config(["calibrate", "--config", str(conf), "--workers", "5"]).workers == 5


def test_config_file_space(tmp_path):
    conf = tmp_path / "run.json"
    space = [{"name": "disk_bw", "unit": "bit/s", "low": 2**20, "high": 2**36}]
    conf.write_text(json.dumps({"space": space}))
    assert parse_config(["calibrate", "--config", str(conf)]).space.names == ["disk_bw"]


def test_simulate_stdin_stdout():
    scenario = json.dumps(scenario_to_dict(template_scenario("FCSN").with_icd(0.5)))
    proc = subprocess.run(
        [sys.executable, "-m", "autocal", "simulate", "--scenario", "-", "--out", "-"],
        input=scenario, capture_output=True, text=True, timeout=60,
    )
    assert proc.returncode == 0, proc.stderr
    assert len(trace_from_dict(json.loads(proc.stdout)).jobs) == 6


def test_simulate_bad_input(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["simulate", "--scenario", str(bad)]) == 2
    bad.write_text(json.dumps({"platform": {}}))
    assert main(["simulate", "--scenario", str(bad)]) == 2


def test_calibrate_and_report(tmp_path, capsys):
    truth = tmp_path / "truth.json"
    assert main(["ground-truth", "--preset", "SCSN", "--granularity", "16e6", "1.6e6", "--out", str(truth)]) == 0
    out = tmp_path / "run"
    args = ["calibrate", "--truth", str(truth), "--algo", "random", "--max-evals", "12", "--workers", "1", "--out", str(out)]
    assert main(args) == 0
    capsys.readouterr()
    assert main(["report", str(out / "random_result.json")]) == 0
    text = capsys.readouterr().out
    assert "MRE: " in text and "evaluations: 12" in text
    assert "bit/s" in text and "flop/s" in text
    assert (out / "random_samples.png").exists()


def test_calibrate_is_deterministic(tmp_path):
    truth = tmp_path / "truth.json"
    main(["ground-truth", "--preset", "FCSN", "--granularity", "16e6", "1.6e6", "--out", str(truth)])
    logs = []
    for k in range(2):
        out = tmp_path / f"r{k}"
        main(["calibrate", "--truth", str(truth), "--algo", "gdfix", "--max-evals", "15", "--workers", "1", "--out", str(out)])
        lines = (out / "gdfix_samples.csv").read_text().splitlines()[1:]
        logs.append([ln.split(",", 2)[0] + ln.split(",", 2)[2] for ln in lines])
    assert logs[0] == logs[1]


def test_report_formats_percent(tmp_path, capsys):
    result = {
        "algorithm": "random", "seed": 0, "evaluations": 7, "workers": 1, "wall_time_s": 12.0,
        "budget": {"mode": "max_evaluations", "limit": 7},
        "space": [{"name": "disk_bw", "unit": "bit/s", "low": 1.0, "high": 1e12}],
        "best": {"index": 3, "point": {"disk_bw": 136e6}, "mre": 4.2, "mae": 0.5, "status": "ok"},
        "meta": {},
    }
    path = tmp_path / "x_result.json"
    path.write_text(json.dumps(result))
    assert main(["report", str(path)]) == 0
    text = capsys.readouterr().out
    assert "4.20%" in text and "136 Mbit/s" in text


def test_report_parse_errors(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["report", str(empty)]) == 2
    junk = tmp_path / "junk.json"
    junk.write_text("[1, 2")
    assert main(["report", str(junk)]) == 2
