"""Search algorithms behind an ask/tell interface.

All algorithms work in normalized coordinates.  ``ask()`` returns a
:class:`Candidate`; the evaluator later calls ``tell(candidate, value)`` with
the objective value (``inf`` for a failed evaluation).  Tells may arrive in
any order relative to asks.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError
from ..params import clamp

STEP_UNDERFLOW = 1e-12
MIN_DELTA = 1e-9


@dataclass(frozen=True)
class Candidate:
    norm: tuple
    path_id: int = 0
    tag: object = None


class Calibrator:
    name = "base"

    def __init__(self, dim: int, seed: int = 0):
        if dim < 1:
            raise ConfigurationError("dimension must be >= 1")
        self.dim = dim
        self.seed = seed
        self.best_value = math.inf
        self.best_norm = None
        self.told = 0

    def ask(self) -> Candidate:
        raise NotImplementedError

    def tell(self, candidate: Candidate, value: float) -> None:
        self.told += 1
        if value < self.best_value:
            self.best_value = value
            self.best_norm = candidate.norm


class GridSearch(Calibrator):
    """Evenly subdivided lattice, refined by midpoints once a level is done.

    Level 0 is the ``2**p`` corners of the unit cube; level ``L`` adds every
    point of the ``(2**L + 1)**p`` lattice not already emitted.  Results do
    not influence the order.
    """

    name = "grid"

    def __init__(self, dim: int, seed: int = 0):
        super().__init__(dim, seed)
        self._points = self._lattice()
        self.level = 0

    def _lattice(self):
        for level in itertools.count():
            self.level = level
            n = 2**level
            for idx in itertools.product(range(n + 1), repeat=self.dim):
                if level == 0 or any(i % 2 for i in idx):
                    yield tuple(i / n for i in idx)

    def ask(self) -> Candidate:
        return Candidate(next(self._points))


class RandomSearch(Calibrator):
    name = "random"

    def __init__(self, dim: int, seed: int = 0):
        super().__init__(dim, seed)
        self.rng = np.random.default_rng(seed)

    def ask(self) -> Candidate:
        return Candidate(tuple(float(u) for u in self.rng.random(self.dim)))


@dataclass(frozen=True)
class GdConfig:
    delta: float = 1e-4
    epsilon: float = 0.01
    dynamic_delta: bool = False
    shrink: float = 0.5
    sufficient_decrease: float = 1e-4
    initial_step: float = 1.0

    def __post_init__(self):
        if not (self.delta > 0):
            raise ConfigurationError("delta must be > 0")
        if not (self.epsilon > 0):
            raise ConfigurationError("epsilon must be > 0")
        if not (0 < self.shrink < 1):
            raise ConfigurationError("shrink factor must lie in (0, 1)")
        if not (self.initial_step > 0):
            raise ConfigurationError("initial step must be > 0")


def probe_offset(x: float, delta: float) -> float:
    """Signed displacement for a finite-difference probe kept inside [0, 1]."""
    if x + delta <= 1.0:
        return delta
    if x - delta >= 0.0:
        return -delta
    return 1.0 - x if 1.0 - x >= x else -x


def forward_gradient(f, x, delta: float) -> list[float]:
    """Finite-difference gradient of ``f`` at ``x`` (used by tests and tools)."""
    fx = f(x)
    g = []
    for i in range(len(x)):
        h = probe_offset(x[i], delta)
        y = list(x)
        y[i] = x[i] + h
        g.append((f(tuple(y)) - fx) / h)
    return g


@dataclass
class _Path:
    """One gradient-descent search path from a random start to convergence."""

    pid: int
    x: tuple
    delta: float
    fx: float = math.nan
    phase: str = "start"
    pending: list = field(default_factory=list)
    awaiting: int = 0
    offsets: list = field(default_factory=list)
    probe_vals: list = field(default_factory=list)
    grad: list = field(default_factory=list)
    step: float = 1.0
    trial: tuple = ()
    done: bool = False
    iterations: int = 0


class GradientDescent(Calibrator):
    """Finite-difference gradient descent with backtracking and random restarts.

    Each search path evaluates its start ``x``, the ``p`` probes
    ``x + delta * e_i``, then backtracks along the negative gradient from
    ``initial_step`` until the Armijo condition holds.  A path stops when an
    iteration improves the objective by less than ``epsilon``; the next ask
    opens a new path at a fresh random point.  With ``dynamic_delta`` the
    probe distance follows the accepted step length.

    Several paths may be open at once: when every open path is waiting on
    results, ``ask`` starts another so idle workers have something to do.
    Path ``k`` draws its start from its own stream seeded by ``(seed, k)``.
    """

    def __init__(self, dim: int, seed: int = 0, config: GdConfig | None = None):
        super().__init__(dim, seed)
        self.config = config or GdConfig()
        self.name = "gddyn" if self.config.dynamic_delta else "gdfix"
        self.paths = {}
        self._next_pid = 0
        self.finished_paths = 0

    def _new_path(self) -> _Path:
        pid = self._next_pid
        self._next_pid += 1
        rng = np.random.default_rng([self.seed, pid])
        x = tuple(float(u) for u in rng.random(self.dim))
        path = _Path(pid, x, self.config.delta, pending=[(x, ("start", 0))], awaiting=1)
        self.paths[pid] = path
        return path

    def ask(self) -> Candidate:
        for pid in sorted(self.paths):
            path = self.paths[pid]
            if path.pending:
                norm, tag = path.pending.pop(0)
                return Candidate(norm, pid, tag)
        path = self._new_path()
        norm, tag = path.pending.pop(0)
        return Candidate(norm, path.pid, tag)

    def tell(self, candidate: Candidate, value: float) -> None:
        super().tell(candidate, value)
        path = self.paths.get(candidate.path_id)
        if path is None:
            return
        kind, idx = candidate.tag
        path.awaiting -= 1
        if kind == "start":
            path.fx = value
            if not math.isfinite(value):
                self._finish(path)
            else:
                self._begin_probe(path)
        elif kind == "probe":
            path.probe_vals[idx] = value
            if path.awaiting == 0:
                self._gradient_ready(path)
        elif kind == "trial":
            self._trial_result(path, value)

    def _finish(self, path: _Path) -> None:
        path.done = True
        self.finished_paths += 1
        del self.paths[path.pid]

    def _begin_probe(self, path: _Path) -> None:
        path.phase = "probe"
        path.offsets = [probe_offset(xi, path.delta) for xi in path.x]
        path.probe_vals = [None] * self.dim
        path.pending = []
        for i, h in enumerate(path.offsets):
            y = list(path.x)
            y[i] = y[i] + h
            path.pending.append((tuple(y), ("probe", i)))
        path.awaiting = self.dim

    def _gradient_ready(self, path: _Path) -> None:
        if not all(math.isfinite(v) for v in path.probe_vals):
            self._finish(path)
            return
        path.grad = [(v - path.fx) / h for v, h in zip(path.probe_vals, path.offsets)]
        path.step = self.config.initial_step
        path.phase = "search"
        self._propose(path)

    def _propose(self, path: _Path) -> None:
        while path.step >= STEP_UNDERFLOW:
            y = clamp(xi - path.step * gi for xi, gi in zip(path.x, path.grad))
            if y == path.x:
                # zero gradient, or every component pinned at a bound
                break
            path.trial = y
            path.pending = [(y, ("trial", 0))]
            path.awaiting = 1
            return
        self._finish(path)

    def _trial_result(self, path: _Path, value: float) -> None:
        cfg = self.config
        slope = sum(g * (yi - xi) for g, yi, xi in zip(path.grad, path.trial, path.x))
        if math.isfinite(value) and value <= path.fx + cfg.sufficient_decrease * slope:
            improvement = path.fx - value
            path.x = path.trial
            path.fx = value
            path.iterations += 1
            if cfg.dynamic_delta:
                path.delta = max(path.step, MIN_DELTA)
            if improvement < cfg.epsilon:
                self._finish(path)
            else:
                self._begin_probe(path)
            return
        path.step *= cfg.shrink
        self._propose(path)


ALGORITHMS = ("grid", "random", "gdfix", "gddyn")


def make_calibrator(name: str, dim: int, seed: int = 0, gd_config: GdConfig | None = None) -> Calibrator:
    name = name.lower()
    if name == "grid":
        return GridSearch(dim, seed)
    if name == "random":
        return RandomSearch(dim, seed)
    if name in ("gdfix", "gddyn", "gd"):
        cfg = gd_config or GdConfig()
        if name != "gd":
            cfg = GdConfig(**{**cfg.__dict__, "dynamic_delta": name == "gddyn"})
        return GradientDescent(dim, seed, cfg)
    raise ConfigurationError(f"unknown algorithm {name!r}; choose from {', '.join(ALGORITHMS)}")
