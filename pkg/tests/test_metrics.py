import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from autocal.engine import JobRecord, Trace
from autocal.errors import EmptyTraceError, InvalidTruthError, MissingScenarioError
from autocal.metrics import (
    GroundTruthSet,
    NodeAverages,
    TruthEntry,
    makespan_rel_diff,
    mean_abs_error,
    mre,
    node_averages,
    scenario_key,
    weighted_mre,
)


def truth_of(values, label="X"):
    """One scenario per value list; node i holds values[i]."""
    entries = [
        TruthEntry(scenario_key(label, k / 10), NodeAverages(dict(enumerate(v))))
        for k, v in enumerate(values)
    ]
    return GroundTruthSet(entries)


def sim_of(values, label="X"):
    return {scenario_key(label, k / 10): NodeAverages(dict(enumerate(v))) for k, v in enumerate(values)}


def test_node_average_mean():
    t = Trace((JobRecord(0, 0, 0.0, 10.0), JobRecord(1, 0, 0.0, 20.0)))
    assert node_averages(t).per_node == {0: 15.0}


def test_node_average_identity():
    t = Trace(tuple(JobRecord(i, i, 1.0, 1.0 + d) for i, d in enumerate([3.0, 4.0, 5.0])))
    assert node_averages(t, 3).per_node == {0: 3.0, 1: 4.0, 2: 5.0}


def test_node_average_job_counts_48():
    jobs = []
    for i in range(48):
        node = 0 if i < 12 else (1 if i < 24 else 2)
        jobs.append(JobRecord(i, node, 0.0, 1.0))
    assert node_averages(Trace(tuple(jobs)), 3).job_count == {0: 12, 1: 12, 2: 24}


def test_node_average_empty():
    with pytest.raises(EmptyTraceError):
        node_averages(Trace())


def test_mre_examples():
    assert mre(sim_of([[5.0, 6.0]]), truth_of([[5.0, 6.0]])).mre == 0.0
    assert mre(sim_of([[110.0]]), truth_of([[100.0]])).mre == pytest.approx(10.0)
    assert mre(sim_of([[11.0, 18.0]]), truth_of([[10.0, 20.0]])).mre == pytest.approx(10.0)


def test_mae_examples():
    assert mean_abs_error(sim_of([[5.0]]), truth_of([[5.0]])) == 0.0
    assert mean_abs_error(sim_of([[110.0]]), truth_of([[100.0]])) == pytest.approx(10.0)
    assert mean_abs_error(sim_of([[11.0, 18.0]]), truth_of([[10.0, 20.0]])) == pytest.approx(1.5)


def test_makespan_rel_diff():
    def tr(m):
        return Trace((JobRecord(0, 0, 0.0, m),))

    assert makespan_rel_diff(tr(100.0), 100.0) == 0.0
    assert makespan_rel_diff(tr(120.0), 100.0) == pytest.approx(20.0)
    assert makespan_rel_diff(tr(80.0), 100.0) == pytest.approx(20.0)


def test_errors():
    with pytest.raises(MissingScenarioError):
        mre({}, truth_of([[1.0]]))
    with pytest.raises(InvalidTruthError):
        truth_of([[0.0]])
    with pytest.raises(MissingScenarioError):
        truth_of([[1.0]]).select([("X", 0.9)])


vals = st.lists(st.floats(min_value=0.1, max_value=1000.0), min_size=3, max_size=3)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(vals, vals), min_size=2, max_size=6), st.randoms())
def test_mre_properties(pairs, rnd):
    sims = [p[0] for p in pairs]
    truths = [p[1] for p in pairs]
    truth = truth_of(truths)
    sim = sim_of(sims)
    rep = mre(sim, truth)
    assert rep.mre >= 0
    # recomputation from per-metric rows
    again = 100.0 * math.fsum(r.relative_error for r in rep.per_metric) / len(rep.per_metric)
    assert abs(again - rep.mre) <= 1e-9
    # union of disjoint subsets is the count-weighted mean
    keys = truth.keys
    cut = rnd.randint(1, len(keys) - 1)
    parts = [mre(sim, truth, keys[:cut]), mre(sim, truth, keys[cut:])]
    assert weighted_mre(parts) == pytest.approx(rep.mre, rel=1e-9, abs=1e-9)
    # permutation of entries does not matter
    shuffled = list(truth.entries)
    rnd.shuffle(shuffled)
    assert mre(sim, GroundTruthSet(shuffled)).mre == pytest.approx(rep.mre, rel=1e-12, abs=1e-12)


def test_truth_file_roundtrip():
    truth = truth_of([[10.0, 11.0, 12.0], [20.0, 21.0, 22.0]])
    d = json.loads(truth.dumps())
    assert d["platform"] == "X"
    assert d["entries"][0]["node_averages"] == {"0": 10.0, "1": 11.0, "2": 12.0}
    back = GroundTruthSet.from_dict(d)
    assert back.keys == truth.keys
    assert back.metric_count == 6


def test_report_serialization():
    rep = mre(sim_of([[11.0, 18.0]]), truth_of([[10.0, 20.0]]))
    lines = rep.to_csv().splitlines()
    assert lines[0] == "scenario,node,sim,truth,rel_err"
    assert len(lines) == 3
    assert json.loads(json.dumps(rep.to_dict()))["mre"] == pytest.approx(10.0)
