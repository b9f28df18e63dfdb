"""Objective: simulate every selected ground-truth scenario and score the fit."""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

from ..engine import Scenario, Trace, run_scenario
from ..metrics import AccuracyReport, GroundTruthSet, mre, node_averages
from ..params import ParameterSpace
from ..scenarios import apply_point, default_space

Simulator = Callable[[Scenario], Trace]


class CalibrationObjective:
    """Callable mapping a physical point to ``(mre_percent, mae_seconds)``.

    ``subset`` lists scenario keys of ``truth`` to calibrate against; by
    default all entries are used.  ``simulator`` defaults to the built-in
    engine and may be replaced with an external process wrapper.
    """

    def __init__(
        self,
        truth: GroundTruthSet,
        template: Scenario,
        space: ParameterSpace | None = None,
        subset: Sequence[tuple] | None = None,
        simulator: Simulator | None = None,
    ):
        self.truth = truth
        self.template = template
        self.space = space or default_space()
        self.subset = list(subset) if subset is not None else None
        self.simulator = simulator or run_scenario
        self._entries = truth.select(self.subset)

    @property
    def simulations_per_evaluation(self) -> int:
        return len(self._entries)

    def report(self, point) -> AccuracyReport:
        base = apply_point(self.template, point, self.space)
        n_nodes = len(base.platform.nodes)
        sim = {}
        for entry in self._entries:
            trace = self.simulator(base.with_icd(entry.key[1]))
            sim[entry.key] = node_averages(trace, n_nodes)
        return mre(sim, self.truth, [e.key for e in self._entries])

    def __call__(self, point) -> tuple[float, float]:
        rep = self.report(point)
        return rep.mre, rep.mae


def evaluate_objective(
    point,
    truth: GroundTruthSet,
    template: Scenario,
    subset: Iterable[tuple] | None = None,
    space: ParameterSpace | None = None,
    simulator: Simulator | None = None,
) -> tuple[float, float]:
    """One-shot ``(mre, mae)`` of ``point`` against ``truth``."""
    subset = list(subset) if subset is not None else None
    return CalibrationObjective(truth, template, space, subset, simulator)(point)
