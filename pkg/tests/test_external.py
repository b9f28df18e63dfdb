import json
import math
import sys

import pytest

from autocal.engine import run_scenario, trace_to_dict
from autocal.errors import EvaluationError
from autocal.external import ExternalSimulator, builtin_command, external_objective
from autocal.calibrate import CalibrationObjective
from autocal.scenarios import DESK_GRANULARITY, baseline_point, default_space, default_truth_config, generate_ground_truth, template_scenario


@pytest.fixture(scope="module")
def truth():
    return generate_ground_truth(
        default_truth_config("SCSN", truth_granularity=DESK_GRANULARITY, icd_list=(0.0, 1.0))
    )


def test_stub_command_returns_finite_mre(tmp_path, truth):
    fixed = trace_to_dict(run_scenario(template_scenario("SCSN")))
    (tmp_path / "trace.json").write_text(json.dumps(fixed))
    stub = tmp_path / "stub.py"
    stub.write_text(f"import sys\nsys.stdin.read()\nprint(open({str(tmp_path / 'trace.json')!r}).read())\n")
    obj = external_objective([sys.executable, str(stub)], truth, template_scenario("SCSN"), default_space(), timeout=30)
    mre, mae = obj(baseline_point("SCSN"))
    assert math.isfinite(mre) and mre >= 0


@pytest.mark.parametrize(
    "code,status",
    [("import sys; sys.exit(1)", "exit_error"), ("print('not json')", "parse_error"), ("import time; time.sleep(5)", "timeout")],
)
def test_failure_statuses(code, status):
    sim = ExternalSimulator([sys.executable, "-c", code], timeout=1.0)
    with pytest.raises(EvaluationError) as err:
        sim(template_scenario("SCSN"))
    assert err.value.status == status


def test_spawn_error():
    with pytest.raises(EvaluationError) as err:
        ExternalSimulator(["/nonexistent/simulator"])(template_scenario("SCSN"))
    assert err.value.status == "spawn_error"


def test_timeout_defaults_to_ten_times_expected():
    assert ExternalSimulator(["x"], expected_runtime=2.5).timeout == 25.0


def test_builtin_command_matches_in_process(truth):
    point = dict(baseline_point("SCSN"), disk_bw=2.0 * baseline_point("SCSN")["disk_bw"])
    template = template_scenario("SCSN")
    inproc = CalibrationObjective(truth, template, default_space())(point)
    ext = external_objective(builtin_command(), truth, template, default_space(), timeout=60)(point)
    assert ext[0] == pytest.approx(inproc[0], abs=1e-9)
    assert ext[1] == pytest.approx(inproc[1], abs=1e-9)
