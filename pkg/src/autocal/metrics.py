"""Accuracy metrics comparing simulated traces with ground truth."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .engine import Trace
from .errors import EmptyTraceError, InvalidTruthError, MissingScenarioError


def icd_key(icd: float) -> float:
    """Canonical form of an ICD value so 0.30000000000000004 matches 0.3."""
    return round(float(icd), 9)


def scenario_key(label: str, icd: float) -> tuple[str, float]:
    return (str(label), icd_key(icd))


@dataclass(frozen=True)
class NodeAverages:
    per_node: dict = field(default_factory=dict)
    job_count: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {str(n): v for n, v in sorted(self.per_node.items())}


def node_averages(trace: Trace, node_count: int | None = None) -> NodeAverages:
    """Mean job duration per node; nodes without jobs are left out."""
    if not trace.jobs:
        raise EmptyTraceError("trace has no jobs; node averages are undefined")
    sums = {}
    counts = {}
    for job in trace.jobs:
        if node_count is not None and not (0 <= job.node_index < node_count):
            raise ValueError(f"job {job.job_id} on node {job.node_index}, platform has {node_count}")
        sums[job.node_index] = sums.get(job.node_index, 0.0) + (job.end - job.start)
        counts[job.node_index] = counts.get(job.node_index, 0) + 1
    per_node = {n: sums[n] / counts[n] for n in sorted(sums)}
    return NodeAverages(per_node, {n: counts[n] for n in sorted(counts)})


@dataclass(frozen=True)
class TruthEntry:
    key: tuple
    node_averages: NodeAverages


class GroundTruthSet:
    """Per-scenario node averages, keyed by ``(platform label, icd)``."""

    def __init__(self, entries: Iterable[TruthEntry]):
        entries = list(entries)
        seen = set()
        for e in entries:
            if e.key in seen:
                raise InvalidTruthError(f"duplicate ground-truth scenario {e.key}")
            seen.add(e.key)
            for node, v in e.node_averages.per_node.items():
                if not (v > 0 and math.isfinite(v)):
                    raise InvalidTruthError(f"truth for {e.key} node {node} must be > 0, got {v}")
        self.entries = entries
        self._by_key = {e.key: e for e in entries}

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, key):
        return self._by_key[key]

    def __contains__(self, key):
        return key in self._by_key

    @property
    def keys(self) -> list[tuple]:
        return [e.key for e in self.entries]

    @property
    def labels(self) -> list[str]:
        return sorted({k[0] for k in self.keys})

    @property
    def metric_count(self) -> int:
        return sum(len(e.node_averages.per_node) for e in self.entries)

    def select(self, subset=None) -> list[TruthEntry]:
        if subset is None:
            return list(self.entries)
        out = []
        for key in subset:
            if key not in self._by_key:
                raise MissingScenarioError(f"scenario {key} is not in the ground truth")
            out.append(self._by_key[key])
        return out

    def keys_for_icds(self, icds: Iterable[float], label: str | None = None) -> list[tuple]:
        labels = [label] if label is not None else self.labels
        keys = []
        for icd in icds:
            matches = [scenario_key(lb, icd) for lb in labels if scenario_key(lb, icd) in self]
            if not matches:
                raise MissingScenarioError(f"no ground-truth entry with icd={icd}")
            keys.extend(matches)
        return keys

    def to_dict(self) -> dict:
        labels = self.labels
        if len(labels) != 1:
            raise ValueError("the ground-truth file format holds a single platform")
        return {
            "platform": labels[0],
            "entries": [
                {"icd": e.key[1], "node_averages": e.node_averages.to_dict()} for e in self.entries
            ],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "GroundTruthSet":
        try:
            label = str(d["platform"])
            entries = []
            for item in d["entries"]:
                per_node = {int(n): float(v) for n, v in item["node_averages"].items()}
                entries.append(TruthEntry(scenario_key(label, item["icd"]), NodeAverages(per_node, {})))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidTruthError(f"malformed ground-truth data: {exc}") from exc
        return cls(entries)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass(frozen=True)
class MetricRow:
    scenario_key: tuple
    node: int
    sim: float
    truth: float
    relative_error: float


@dataclass(frozen=True)
class AccuracyReport:
    mre: float
    mae: float
    per_metric: tuple

    def to_dict(self) -> dict:
        return {
            "mre": self.mre,
            "mae": self.mae,
            "per_metric": [
                {
                    "platform": r.scenario_key[0],
                    "icd": r.scenario_key[1],
                    "node": r.node,
                    "sim": r.sim,
                    "truth": r.truth,
                    "relative_error": r.relative_error,
                }
                for r in self.per_metric
            ],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scenario", "node", "sim", "truth", "rel_err"])
        for r in self.per_metric:
            label, icd = r.scenario_key
            w.writerow([f"{label}@{icd:g}", r.node, repr(r.sim), repr(r.truth), repr(r.relative_error)])
        return buf.getvalue()


def _rows(sim: Mapping, truth: GroundTruthSet, subset) -> list[MetricRow]:
    rows = []
    for entry in truth.select(subset):
        if entry.key not in sim:
            raise MissingScenarioError(f"no simulated result for scenario {entry.key}")
        simulated = sim[entry.key].per_node
        for node, t in entry.node_averages.per_node.items():
            if not (t > 0):
                raise InvalidTruthError(f"truth for {entry.key} node {node} must be > 0")
            s = simulated.get(node)
            if s is None:
                raise MissingScenarioError(f"simulation of {entry.key} has no jobs on node {node}")
            rows.append(MetricRow(entry.key, node, s, t, abs(s - t) / t))
    return rows


def mre(sim: Mapping, truth: GroundTruthSet, subset=None) -> AccuracyReport:
    """Mean relative error (percent) over the selected (scenario, node) metrics.

    ``sim`` maps scenario keys to :class:`NodeAverages`; ``subset`` optionally
    restricts the comparison to some scenario keys.
    """
    rows = _rows(sim, truth, subset)
    if not rows:
        raise InvalidTruthError("no metrics selected")
    n = len(rows)
    rel = 100.0 * math.fsum(r.relative_error for r in rows) / n
    mae = math.fsum(abs(r.sim - r.truth) for r in rows) / n
    return AccuracyReport(rel, mae, tuple(rows))


def mean_abs_error(sim: Mapping, truth: GroundTruthSet, subset=None) -> float:
    return mre(sim, truth, subset).mae


def makespan_rel_diff(sim_trace: Trace, truth_makespan: float) -> float:
    if not sim_trace.jobs:
        raise EmptyTraceError("trace has no jobs; makespan is undefined")
    if not (truth_makespan > 0):
        raise InvalidTruthError(f"truth makespan must be > 0, got {truth_makespan}")
    return 100.0 * abs(sim_trace.makespan - truth_makespan) / truth_makespan


def weighted_mre(parts: Sequence[AccuracyReport]) -> float:
    """Combine reports over disjoint subsets, weighting by metric count."""
    total = sum(len(p.per_metric) for p in parts)
    return math.fsum(p.mre * len(p.per_metric) for p in parts) / total
