"""Replications of the case-study experiments on synthetic ground truth.

Each experiment writes CSV tables (plus JSON summaries and PNG figures) into
an output directory.  CSV files start with one ``#`` comment line holding the
generation timestamp; every other line is deterministic under evaluation
budgets with a fixed seed, except for columns that report measured time.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import statistics
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import plotting
from .calibrate import (
    Budget,
    CalibrationObjective,
    CalibrationResult,
    GdConfig,
    run_calibration,
    save_result,
    write_sample_log,
)
from .errors import ConfigurationError
from .metrics import GroundTruthSet, icd_key
from .params import ParameterSpace
from .scenarios import (
    DESK_TRUTH_GRANULARITY,
    GRANULARITIES,
    ICD_VALUES,
    FULL_GRANULARITY,
    FULL_WORKLOAD,
    PRESETS,
    SUBSET_ICDS,
    DESK_WORKLOAD,
    baseline_point,
    default_space,
    generate_ground_truth,
    icd_subsets,
    template_scenario,
    TruthConfig,
)

log = logging.getLogger(__name__)

EXPERIMENTS = ("table3", "table4", "table5", "fig2")
DESK_EVALS = 300
DESK_TIME_BUDGET = 20.0
FULL_TIME_BUDGET = 6 * 3600.0
DEFAULT_NOISE = 0.02
# finer than every (B, b) pair studied in table5
DESK_TABLE5_TRUTH = (5e5, 5e4)
FULL_TABLE5_TRUTH = (1e7, 1e5)


@dataclass
class ExperimentSettings:
    out_dir: Path
    presets: list | None = None
    algorithms: list | None = None
    budget: Budget | None = None
    workers: int = 1
    seed: int = 0
    paper_scale: bool = False
    noise_stddev: float = DEFAULT_NOISE
    truth: GroundTruthSet | None = None
    space: ParameterSpace = field(default_factory=default_space)
    gd_config: GdConfig | None = None
    simulator: object = None

    def default_budget(self, time_based: bool = False) -> Budget:
        if self.budget is not None:
            return self.budget
        if self.paper_scale:
            return Budget.wall_clock(FULL_TIME_BUDGET)
        return Budget.wall_clock(DESK_TIME_BUDGET) if time_based else Budget.evaluations(DESK_EVALS)


def _stamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class _Table:
    """CSV writer that flushes each row so partial results survive a crash."""

    def __init__(self, path: Path, header, title: str):
        self.path = path
        self.fh = open(path, "w", newline="")
        self.fh.write(f"# autocal {title} generated={_stamp()}\n")
        self.writer = csv.writer(self.fh, lineterminator="\n")
        self.writer.writerow(header)
        self.fh.flush()

    def row(self, values):
        self.writer.writerow([_fmt(v) for v in values])
        self.fh.flush()

    def close(self):
        self.fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}" if math.isfinite(v) else str(v)
    return v


def _truth(settings: ExperimentSettings, label: str, granularity=None) -> GroundTruthSet:
    if settings.truth is not None:
        return settings.truth
    if granularity is None:
        granularity = FULL_GRANULARITY if settings.paper_scale else DESK_TRUTH_GRANULARITY
    cfg = TruthConfig(
        preset=label,
        hidden_point=baseline_point(label),
        icd_list=ICD_VALUES,
        truth_granularity=granularity,
        noise_stddev=settings.noise_stddev,
        noise_seed=settings.seed,
        workload=FULL_WORKLOAD if settings.paper_scale else DESK_WORKLOAD,
        space=settings.space,
    )
    return generate_ground_truth(cfg)


def _calibrate(settings, objective, algorithm, budget, tag) -> CalibrationResult:
    log.info("calibrating %s with %s (%s %s)", tag, algorithm, budget.mode, budget.limit)
    result = run_calibration(
        settings.space,
        objective,
        algorithm,
        budget,
        workers=settings.workers,
        seed=settings.seed,
        gd_config=settings.gd_config,
    )
    out = Path(settings.out_dir)
    write_sample_log(out / f"{tag}_{result.algorithm}_samples.csv", result)
    save_result(out / f"{tag}_{result.algorithm}_result.json", result)
    return result


def _objective(settings, truth, label, subset=None, granularity=None):
    template = template_scenario(label, settings.paper_scale, granularity)
    return CalibrationObjective(truth, template, settings.space, subset, settings.simulator)


def run_table3(settings: ExperimentSettings) -> dict:
    """All algorithms plus the manual baseline on each platform."""
    presets = settings.presets or list(PRESETS)
    algorithms = settings.algorithms or ["grid", "random", "gdfix", "gddyn"]
    budget = settings.default_budget()
    out = Path(settings.out_dir)
    mre = {"human": {}}
    values = []
    for label in presets:
        truth = _truth(settings, label)
        objective = _objective(settings, truth, label)
        human = baseline_point(label)
        mre["human"][label] = objective(human)[0]
        values.append(("human", label, human))
        for algo in algorithms:
            result = _calibrate(settings, objective, algo, budget, f"table3_{label}")
            mre.setdefault(result.algorithm, {})[label] = result.best.mre
            values.append((result.algorithm, label, result.best.point))

    with _Table(out / "table3_mre.csv", ["method", *presets], "table3 mre_percent") as t:
        for method, row in mre.items():
            t.row([method, *(row.get(p, math.nan) for p in presets)])
    names = settings.space.names
    units = [settings.space[n].unit for n in names]
    with _Table(
        out / "table3_values.csv",
        ["method", "platform", *(f"{n} [{u}]" for n, u in zip(names, units))],
        "table3 calibrated values",
    ) as t:
        for method, label, point in values:
            t.row([method, label, *(point[n] for n in names)])
    summary = {"mre_percent": mre, "values": [{"method": m, "platform": p, "point": pt} for m, p, pt in values]}
    (out / "table3.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary


def subset_budget(budget: Budget, n_full: int, n_subset: int) -> Budget:
    """Same simulator-invocation budget for a calibration on fewer scenarios."""
    if budget.mode == "wall_clock":
        return budget
    return Budget.evaluations(max(1, round(budget.limit * n_full / n_subset)))


def run_table4(settings: ExperimentSettings) -> dict:
    """Calibrate on ICD subsets, score every calibration on the full ICD set."""
    label = (settings.presets or ["FCSN"])[0]
    algorithm = (settings.algorithms or ["gdfix"])[0]
    budget = settings.default_budget()
    out = Path(settings.out_dir)
    truth = _truth(settings, label)
    full = _objective(settings, truth, label)
    n_full = full.simulations_per_evaluation

    runs = []
    with _Table(
        out / "table4_subsets.csv",
        ["n_icd", "icds", "evaluations", "subset_mre_percent", "full_mre_percent"],
        "table4 per-subset",
    ) as t:
        plan = [(k, s) for k in (1, 2, 3) for s in icd_subsets(SUBSET_ICDS, k)]
        plan.append((len(ICD_VALUES), tuple(e.key[1] for e in truth.entries)))
        for k, icds in plan:
            keys = truth.keys_for_icds(icds, label)
            objective = _objective(settings, truth, label, keys)
            b = subset_budget(budget, n_full, len(keys))
            tag = "table4_" + label + "_" + "-".join(f"{icd_key(x):g}" for x in icds)
            if k == len(ICD_VALUES):
                tag = f"table4_{label}_all"
            result = _calibrate(settings, objective, algorithm, b, tag)
            full_mre = full(result.best.point)[0]
            runs.append({"size": k, "icds": list(icds), "evaluations": result.evaluations,
                         "subset_mre": result.best.mre, "full_mre": full_mre})
            t.row([k, " ".join(f"{x:g}" for x in icds), result.evaluations, result.best.mre, full_mre])

    rows = []
    for k in sorted({r["size"] for r in runs}):
        vals = [r["full_mre"] for r in runs if r["size"] == k]
        rows.append({"size": k, "n_subsets": len(vals), "best": min(vals),
                     "median": statistics.median(vals), "worst": max(vals)})
    with _Table(out / "table4.csv", ["n_icd", "n_subsets", "best", "median", "worst"], "table4 full-set mre_percent") as t:
        for r in rows:
            t.row([r["size"], r["n_subsets"], r["best"], r["median"], r["worst"]])
    plotting.plot_subset_study(rows, out / "table4.png", title=f"ICD subsets, {label}, {algorithm}")
    summary = {"platform": label, "algorithm": algorithm, "rows": rows, "runs": runs}
    (out / "table4.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary


def run_table5(settings: ExperimentSettings, granularities=GRANULARITIES) -> dict:
    """Calibration accuracy against simulation granularity."""
    label = (settings.presets or ["FCSN"])[0]
    algorithms = settings.algorithms or ["gdfix", "grid", "random"]
    budget = settings.default_budget(time_based=True)
    out = Path(settings.out_dir)
    truth_gran = FULL_TABLE5_TRUTH if settings.paper_scale else DESK_TABLE5_TRUTH
    truth = _truth(settings, label, truth_gran)
    rows = []
    with _Table(
        out / "table5.csv",
        ["algorithm", "block_size", "buffer_size", "sim_time_s", "evaluations", "mre_percent"],
        "table5",
    ) as t:
        for B, b in granularities:
            objective = _objective(settings, truth, label, granularity=(B, b))
            for algo in algorithms:
                result = _calibrate(settings, objective, algo, budget, f"table5_{label}_B{B:g}_b{b:g}")
                sims = result.evaluations * objective.simulations_per_evaluation
                sim_time = result.wall_time * settings.workers / max(1, sims)
                row = {"algorithm": result.algorithm, "block_size": B, "buffer_size": b,
                       "sim_time_s": sim_time, "evaluations": result.evaluations,
                       "mre_percent": result.best.mre}
                rows.append(row)
                t.row([row[k] for k in ("algorithm", "block_size", "buffer_size", "sim_time_s", "evaluations", "mre_percent")])
    plotting.plot_granularity(rows, out / "table5.png", title=f"MRE vs simulation time, {label}")
    summary = {"platform": label, "truth_granularity": list(truth_gran), "rows": rows}
    (out / "table5.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary


def best_so_far_curve(result: CalibrationResult) -> list[dict]:
    rows = []
    for sample, best_mre, best_mae in result.best_so_far():
        rows.append({"eval_index": sample.index, "wall_time_s": sample.wall_time,
                     "best_mae_s": best_mae, "best_mre_percent": best_mre})
    return rows


def run_fig2(settings: ExperimentSettings) -> dict:
    """Best-so-far error against calibration time for each algorithm."""
    label = (settings.presets or ["FCSN"])[0]
    algorithms = settings.algorithms or ["grid", "random", "gdfix"]
    budget = settings.default_budget()
    out = Path(settings.out_dir)
    truth = _truth(settings, label)
    objective = _objective(settings, truth, label)
    curves = {}
    with _Table(
        out / "fig2_curves.csv",
        ["algorithm", "eval_index", "wall_time_s", "best_mae_s", "best_mre_percent"],
        "fig2 best-so-far",
    ) as t:
        for algo in algorithms:
            result = _calibrate(settings, objective, algo, budget, f"fig2_{label}")
            curve = best_so_far_curve(result)
            curves[result.algorithm] = curve
            for r in curve:
                t.row([result.algorithm, r["eval_index"], r["wall_time_s"], r["best_mae_s"], r["best_mre_percent"]])
    plotting.plot_error_vs_time(
        {a: ([r["wall_time_s"] for r in c], [r["best_mae_s"] for r in c]) for a, c in curves.items()},
        out / "fig2.png",
        title=f"Absolute error vs time, {label}",
    )
    plotting.plot_error_vs_time(
        {a: ([r["wall_time_s"] for r in c], [r["best_mre_percent"] for r in c]) for a, c in curves.items()},
        out / "fig2_mre.png",
        ylabel="Best-so-far MRE (%)",
        title=f"MRE vs time, {label}",
    )
    summary = {
        "platform": label,
        "final": {a: {"best_mae_s": c[-1]["best_mae_s"], "best_mre_percent": c[-1]["best_mre_percent"],
                      "evaluations": len(c)} for a, c in curves.items()},
    }
    (out / "fig2.json").write_text(json.dumps(summary, indent=2) + "\n")
    return {"curves": curves, **summary}


RUNNERS = {"table3": run_table3, "table4": run_table4, "table5": run_table5, "fig2": run_fig2}


def run_experiment(name: str, settings: ExperimentSettings) -> dict:
    if name not in RUNNERS:
        raise ConfigurationError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
    Path(settings.out_dir).mkdir(parents=True, exist_ok=True)
    return RUNNERS[name](settings)
