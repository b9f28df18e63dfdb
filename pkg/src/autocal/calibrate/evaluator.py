"""Budgeted, optionally parallel driver for ask/tell calibrators."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from dataclasses import dataclass, field
from datetime import datetime, timezone

from ..errors import AutocalError, CalibrationFailedError, ConfigurationError, EvaluationError, GranularityError
from ..params import ParameterSpace, denormalize, normalize
from .algorithms import Calibrator, GdConfig, make_calibrator

log = logging.getLogger(__name__)

DEFAULT_WALL_CLOCK = 6 * 3600.0
DEFAULT_WORKERS = 40


@dataclass(frozen=True)
class Budget:
    mode: str
    limit: float

    def __post_init__(self):
        if self.mode not in ("wall_clock", "max_evaluations"):
            raise ConfigurationError(f"unknown budget mode {self.mode!r}")
        if not (self.limit > 0):
            raise ConfigurationError("budget limit must be positive")
        if self.mode == "max_evaluations" and int(self.limit) != self.limit:
            raise ConfigurationError("max_evaluations must be an integer")

    @classmethod
    def wall_clock(cls, seconds: float = DEFAULT_WALL_CLOCK) -> "Budget":
        return cls("wall_clock", float(seconds))

    @classmethod
    def evaluations(cls, n: int) -> "Budget":
        return cls("max_evaluations", int(n))

    def to_dict(self) -> dict:
        return {"mode": self.mode, "limit": self.limit}


@dataclass(frozen=True)
class Sample:
    index: int
    point: dict
    norm: tuple
    mre: float
    mae: float
    wall_time: float
    search_path_id: int = 0
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "point": self.point,
            "norm": list(self.norm),
            "mre": self.mre,
            "mae": self.mae,
            "wall_time": self.wall_time,
            "search_path_id": self.search_path_id,
            "status": self.status,
        }

    @classmethod
    def from_dict(cls, d) -> "Sample":
        return cls(
            int(d["index"]),
            {k: float(v) for k, v in d["point"].items()},
            tuple(float(u) for u in d.get("norm", ())),
            float(d["mre"]),
            float(d["mae"]),
            float(d.get("wall_time", 0.0)),
            int(d.get("search_path_id", 0)),
            str(d.get("status", "ok")),
        )


@dataclass
class CalibrationResult:
    best: Sample
    log: list
    algorithm: str
    seed: int
    evaluations: int
    space: ParameterSpace
    budget: Budget | None = None
    wall_time: float = 0.0
    workers: int = 1
    meta: dict = field(default_factory=dict)

    def best_so_far(self) -> list[tuple[Sample, float, float]]:
        """``(sample, best_mre, best_mae)`` along the log.

        Both columns are running minima over successful samples, taken
        independently, so each is non-increasing.
        """
        out = []
        best_mre = best_mae = math.inf
        for s in sorted(self.log, key=lambda s: s.index):
            if s.ok:
                best_mre = min(best_mre, s.mre)
                best_mae = min(best_mae, s.mae)
            out.append((s, best_mre, best_mae))
        return out

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "seed": self.seed,
            "evaluations": self.evaluations,
            "workers": self.workers,
            "wall_time_s": self.wall_time,
            "budget": self.budget.to_dict() if self.budget else None,
            "space": self.space.to_list(),
            "best": self.best.to_dict(),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d, log=None) -> "CalibrationResult":
        try:
            budget = Budget(**d["budget"]) if d.get("budget") else None
            best = Sample.from_dict(d["best"])
            return cls(
                best=best,
                log=list(log) if log is not None else [best],
                algorithm=str(d["algorithm"]),
                seed=int(d["seed"]),
                evaluations=int(d["evaluations"]),
                space=ParameterSpace.from_list(d["space"]),
                budget=budget,
                wall_time=float(d.get("wall_time_s", 0.0)),
                workers=int(d.get("workers", 1)),
                meta=dict(d.get("meta", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed calibration result: {exc}") from exc


# ---------------------------------------------------------------------------
# Evaluation in the current process or in pool workers

_worker_objective = None


def _init_worker(objective):
    global _worker_objective
    _worker_objective = objective


def _safe_evaluate(objective, point):
    try:
        mre, mae = objective(point)
    except EvaluationError as exc:
        return exc.status, math.inf, math.inf, str(exc)
    except GranularityError as exc:
        return "granularity_error", math.inf, math.inf, str(exc)
    except AutocalError as exc:
        return "sim_error", math.inf, math.inf, str(exc)
    except Exception as exc:  # noqa: BLE001 - any simulator failure scores +inf
        return "error", math.inf, math.inf, f"{type(exc).__name__}: {exc}"
    if not (math.isfinite(mre) and mre >= 0):
        return "invalid_objective", math.inf, math.inf, f"objective returned {mre!r}"
    return "ok", float(mre), float(mae), ""


def _pool_evaluate(point):
    return _safe_evaluate(_worker_objective, point)


def run_calibration(
    space: ParameterSpace,
    objective,
    algorithm: str | Calibrator = "random",
    budget: Budget | None = None,
    workers: int = 1,
    seed: int = 0,
    gd_config: GdConfig | None = None,
    on_sample=None,
) -> CalibrationResult:
    """Drive ``algorithm`` against ``objective`` until the budget is spent.

    ``objective`` maps a physical point (dict) to ``(mre, mae)``; with
    ``workers > 1`` it must be picklable.  Up to ``workers`` evaluations are
    kept in flight and results are told back in completion order.  Under a
    wall-clock budget nothing new starts after the deadline, but in-flight
    evaluations are still collected.
    """
    if workers < 1:
        raise ConfigurationError("workers must be >= 1")
    budget = budget or Budget.wall_clock()
    calib = (
        algorithm
        if isinstance(algorithm, Calibrator)
        else make_calibrator(algorithm, space.dim, seed, gd_config)
    )
    t0 = time.monotonic()
    deadline = t0 + budget.limit if budget.mode == "wall_clock" else math.inf
    max_started = int(budget.limit) if budget.mode == "max_evaluations" else math.inf
    started = 0
    samples = []

    def can_start():
        return started < max_started and time.monotonic() < deadline

    def record(cand, point, outcome):
        status, mre, mae, msg = outcome
        if status != "ok":
            log.debug("evaluation failed (%s): %s", status, msg)
        s = Sample(
            index=len(samples),
            point=point,
            norm=cand.norm,
            mre=mre,
            mae=mae,
            wall_time=time.monotonic() - t0,
            search_path_id=cand.path_id,
            status=status,
        )
        samples.append(s)
        calib.tell(cand, mre)
        if on_sample is not None:
            on_sample(s)

    if workers == 1:
        while can_start():
            cand = calib.ask()
            point = denormalize(space, cand.norm)
            started += 1
            record(cand, point, _safe_evaluate(objective, point))
    else:
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_init_worker, initargs=(objective,)
        ) as pool:
            inflight = {}
            order = 0
            while True:
                while len(inflight) < workers and can_start():
                    cand = calib.ask()
                    point = denormalize(space, cand.norm)
                    fut = pool.submit(_pool_evaluate, point)
                    inflight[fut] = (order, cand, point)
                    order += 1
                    started += 1
                if not inflight:
                    break
                timeout = None if deadline == math.inf else max(0.0, deadline - time.monotonic())
                done, _ = wait(list(inflight), timeout=timeout, return_when=FIRST_COMPLETED)
                if not done and time.monotonic() >= deadline:
                    done, _ = wait(list(inflight), return_when=FIRST_COMPLETED)
                for fut in sorted(done, key=lambda f: inflight[f][0]):
                    _, cand, point = inflight.pop(fut)
                    try:
                        outcome = fut.result()
                    except Exception as exc:  # noqa: BLE001 - worker crash
                        outcome = ("error", math.inf, math.inf, repr(exc))
                    record(cand, point, outcome)

    ok = [s for s in samples if s.ok]
    if not ok:
        raise CalibrationFailedError(
            f"{calib.name}: no successful evaluation out of {len(samples)}"
        )
    best = min(ok, key=lambda s: (s.mre, s.index))
    return CalibrationResult(
        best=best,
        log=samples,
        algorithm=calib.name,
        seed=seed,
        evaluations=len(samples),
        space=space,
        budget=budget,
        wall_time=time.monotonic() - t0,
        workers=workers,
    )


# ---------------------------------------------------------------------------
# Sample log CSV


def sample_log_header(space: ParameterSpace) -> list[str]:
    return ["eval_index", "wall_time_s", *space.names, "mre_percent", "mae_s", "search_path_id", "status"]


def format_sample_log(result: CalibrationResult, started: datetime | None = None) -> str:
    """Sample log as CSV text.

    The first line is a ``#`` comment carrying the run metadata and the only
    wall-clock timestamp in the file.
    """
    started = started or datetime.now(timezone.utc)
    buf = io.StringIO()
    buf.write(
        f"# autocal sample log algorithm={result.algorithm} seed={result.seed} "
        f"started={started.isoformat(timespec='seconds')}\n"
    )
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(sample_log_header(result.space))
    for s in sorted(result.log, key=lambda s: s.index):
        w.writerow(
            [
                s.index,
                f"{s.wall_time:.6f}",
                *(repr(s.point[n]) for n in result.space.names),
                repr(s.mre),
                repr(s.mae),
                s.search_path_id,
                s.status,
            ]
        )
    return buf.getvalue()


def write_sample_log(path, result: CalibrationResult) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(format_sample_log(result))


def read_sample_log(path, space: ParameterSpace | None = None) -> list[Sample]:
    """Parse a sample log; raises ``ValueError`` on empty or malformed files."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    if not rows:
        raise ValueError(f"{path}: empty sample log")
    header = rows[0]
    fixed = {"eval_index", "wall_time_s", "mre_percent", "mae_s", "search_path_id", "status"}
    missing = fixed - set(header)
    if missing:
        raise ValueError(f"{path}: sample log is missing columns {sorted(missing)}")
    names = [h for h in header if h not in fixed]
    if space is not None and names != space.names:
        raise ValueError(f"{path}: parameter columns {names} do not match {space.names}")
    col = {h: i for i, h in enumerate(header)}
    samples = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            point = {n: float(row[col[n]]) for n in names}
            norm = ()
            if space is not None:
                norm = normalize(space, point)
            samples.append(
                Sample(
                    index=int(row[col["eval_index"]]),
                    point=point,
                    norm=norm,
                    mre=float(row[col["mre_percent"]]),
                    mae=float(row[col["mae_s"]]),
                    wall_time=float(row[col["wall_time_s"]]),
                    search_path_id=int(row[col["search_path_id"]]),
                    status=row[col["status"]],
                )
            )
        except (IndexError, ValueError) as exc:
            raise ValueError(f"{path}:{lineno}: malformed row: {exc}") from exc
    if not samples:
        raise ValueError(f"{path}: sample log has no rows")
    return samples


def save_result(path, result: CalibrationResult) -> None:
    with open(path, "w") as fh:
        json.dump(result.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_result(path) -> CalibrationResult:
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(d, dict):
        raise ValueError(f"{path}: expected a JSON object")
    return CalibrationResult.from_dict(d)
