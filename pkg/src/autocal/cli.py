"""Command-line entry point.

Subcommands::

    autocal simulate      --scenario FILE|- [--out FILE|-]
    autocal ground-truth  --preset FCSN [--noise 0.02] --out truth.json
    autocal calibrate     --preset FCSN [--truth truth.json] --algo random --max-evals 300 --out runs/
    autocal experiment    {table3,table4,table5,fig2} --out results/
    autocal report        runs/random_result.json | runs/random_samples.csv

A JSON config file (``--config run.json``) may set any option by its long
name with dashes replaced by underscores, plus ``space``: a list of
``{name, unit, low, high}`` parameter specs.  Command-line flags win over the
file.  ``AUTOCAL_WORKERS`` overrides the worker count from the file but not
the ``--workers`` flag.

Exit codes: 0 success, 1 usage, 2 input or parse error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__, plotting
from .calibrate import (
    ALGORITHMS,
    Budget,
    CalibrationObjective,
    GdConfig,
    load_result,
    read_sample_log,
    run_calibration,
    save_result,
    write_sample_log,
)
from .calibrate.evaluator import DEFAULT_WALL_CLOCK, DEFAULT_WORKERS, CalibrationResult
from .engine import dumps_trace, run_scenario, scenario_from_dict
from .errors import AutocalError, ConfigurationError
from .experiments import EXPERIMENTS, ExperimentSettings, run_experiment
from .external import ExternalSimulator
from .metrics import GroundTruthSet
from .params import ParameterSpace, ParameterSpec
from .scenarios import (
    DESK_TRUTH_GRANULARITY,
    DESK_WORKLOAD,
    ICD_VALUES,
    FULL_GRANULARITY,
    FULL_WORKLOAD,
    PRESETS,
    TruthConfig,
    baseline_point,
    default_space,
    generate_ground_truth,
    get_preset,
    template_scenario,
)
from .units import human_rate

log = logging.getLogger("autocal")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_RUNTIME = 0, 1, 2, 3
COMMANDS = ("simulate", "ground-truth", "calibrate", "experiment", "report")
WORKERS_ENV = "AUTOCAL_WORKERS"


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class RunConfig:
    command: str
    scenario: str | None = None
    truth: str | None = None
    out: str | None = None
    inputs: list = field(default_factory=list)
    preset: str = "FCSN"
    algorithm: str = "random"
    seed: int = 0
    budget: Budget = field(default_factory=lambda: Budget.wall_clock(DEFAULT_WALL_CLOCK))
    budget_explicit: bool = False
    workers: int = 1
    icds: tuple | None = None
    experiment: str | None = None
    presets: list | None = None
    algorithms: list | None = None
    paper_scale: bool = False
    noise: float = 0.0
    noise_seed: int = 0
    granularity: tuple | None = None
    truth_granularity: tuple | None = None
    space: ParameterSpace = field(default_factory=default_space)
    external: str | None = None
    timeout: float | None = None
    retries: int = 0
    verbose: bool = False

    @property
    def gd_config(self) -> GdConfig:
        return GdConfig(dynamic_delta=self.algorithm == "gddyn")


def default_workers() -> int:
    return max(1, min(os.cpu_count() or 1, DEFAULT_WORKERS))


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("-v", "--verbose", action="store_true", default=None)

    def platform_opts(p):
        p.add_argument("--preset", choices=list(PRESETS), type=str.upper)
        p.add_argument("--paper-scale", action="store_true", default=None,
                       help="48 jobs x 20 files x 427 MB instead of the desk workload")
        p.add_argument("--granularity", nargs=2, type=float, metavar=("B", "b"),
                       help="block and buffer size in bytes for calibration runs")

    def budget_opts(p):
        g = p.add_mutually_exclusive_group()
        g.add_argument("--max-evals", type=int)
        g.add_argument("--time-budget", type=float, help="wall-clock seconds")

    parser = _Parser(prog="autocal", description="Calibrate a storage/compute simulator against execution traces.")
    parser.add_argument("--version", action="version", version=f"autocal {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common], help="run one scenario")
    p.add_argument("--scenario", help="scenario JSON file, '-' for stdin")
    p.add_argument("--out", default="-", help="trace JSON file, '-' for stdout")

    p = sub.add_parser("ground-truth", parents=[common], help="synthesize ground truth at the baseline point")
    platform_opts(p)
    p.add_argument("--noise", type=float, help="lognormal sigma of the per-node noise")
    p.add_argument("--noise-seed", type=int)
    p.add_argument("--icds", type=float, nargs="+")
    p.add_argument("--out", default="-")

    p = sub.add_parser("calibrate", parents=[common], help="calibrate against a ground truth")
    platform_opts(p)
    budget_opts(p)
    p.add_argument("--truth", help="ground-truth JSON (generated from the preset when omitted)")
    p.add_argument("--algo", dest="algorithm", choices=ALGORITHMS)
    p.add_argument("--icds", type=float, nargs="+", help="calibrate on these ICD values only")
    p.add_argument("--noise", type=float)
    p.add_argument("--external", help="simulator command speaking the JSON wire protocol")
    p.add_argument("--timeout", type=float, help="seconds per external simulation")
    p.add_argument("--retries", type=int)
    p.add_argument("--out", help="output directory")

    p = sub.add_parser("experiment", parents=[common], help="replicate an experiment structure")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--paper-scale", action="store_true", default=None)
    budget_opts(p)
    p.add_argument("--presets", nargs="+", type=str.upper, choices=list(PRESETS))
    p.add_argument("--algos", dest="algorithms", nargs="+", choices=ALGORITHMS)
    p.add_argument("--noise", type=float)
    p.add_argument("--truth", help="ground-truth JSON used instead of synthesizing one")
    p.add_argument("--out", help="output directory")

    p = sub.add_parser("report", parents=[common], help="summarize calibration results")
    p.add_argument("inputs", nargs="+", help="result JSON or sample-log CSV files")
    return parser


_FILE_KEYS = {
    "scenario", "truth", "out", "preset", "algorithm", "seed", "workers", "icds",
    "presets", "algorithms", "paper_scale", "noise", "noise_seed", "granularity",
    "truth_granularity", "space", "external", "timeout", "retries", "max_evals",
    "time_budget", "verbose",
}


def _load_config_file(path) -> dict:
    if not Path(path).is_file():
        raise UsageError(f"config file not found: {path}")
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise InputError(f"{path}: config must be a JSON object")
    unknown = set(data) - _FILE_KEYS
    if unknown:
        raise UsageError(f"{path}: unknown config keys {sorted(unknown)}")
    return data


def parse_config(argv=None, config: dict | None = None) -> RunConfig:
    """Turn argv (plus an optional config mapping or ``--config`` file) into a RunConfig.

    Raises :class:`UsageError` or :class:`InputError`.
    """
    args = build_parser().parse_args(argv)
    if not args.command:
        raise UsageError("autocal: a command is required: " + ", ".join(COMMANDS))
    flags = {k: v for k, v in vars(args).items() if v is not None}
    file_vals = dict(config or {})
    if "config" in flags:
        file_vals.update(_load_config_file(flags.pop("config")))
    if WORKERS_ENV in os.environ:
        try:
            file_vals["workers"] = int(os.environ[WORKERS_ENV])
        except ValueError:
            raise UsageError(f"{WORKERS_ENV} must be an integer") from None

    # budget: a flag of either kind replaces any budget from the file
    if "max_evals" in flags or "time_budget" in flags:
        file_vals.pop("max_evals", None)
        file_vals.pop("time_budget", None)
    merged = {**file_vals, **flags}
    if "max_evals" in merged and "time_budget" in merged:
        raise UsageError("--max-evals and --time-budget are mutually exclusive")

    cfg = RunConfig(command=args.command)
    try:
        if "max_evals" in merged:
            cfg.budget = Budget.evaluations(int(merged.pop("max_evals")))
            cfg.budget_explicit = True
        elif "time_budget" in merged:
            cfg.budget = Budget.wall_clock(float(merged.pop("time_budget")))
            cfg.budget_explicit = True
        if "space" in merged:
            cfg.space = ParameterSpace.from_list(merged.pop("space"))
    except (ConfigurationError, ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc
    merged.setdefault("workers", default_workers())
    for key, value in merged.items():
        if key in ("granularity", "truth_granularity", "icds") and value is not None:
            value = tuple(float(v) for v in value)
        if hasattr(cfg, key):
            setattr(cfg, key, value)
    if cfg.preset:
        cfg.preset = cfg.preset.upper()
    if cfg.workers < 1:
        raise UsageError("workers must be >= 1")
    if cfg.command == "simulate" and not cfg.scenario:
        raise UsageError("simulate: --scenario is required")
    for attr in ("scenario", "truth"):
        path = getattr(cfg, attr)
        if path and path != "-" and not Path(path).is_file():
            raise UsageError(f"{attr} file not found: {path}")
    for path in cfg.inputs:
        if not Path(path).is_file():
            raise UsageError(f"input file not found: {path}")
    return cfg


# ---------------------------------------------------------------------------
# Commands


def _read_json(path):
    try:
        text = sys.stdin.read() if path == "-" else Path(path).read_text()
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSON: {exc}") from exc


def _write_text(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


def cmd_simulate(cfg: RunConfig) -> int:
    data = _read_json(cfg.scenario)
    try:
        scenario = scenario_from_dict(data)
    except (ConfigurationError, KeyError, TypeError, ValueError) as exc:
        raise InputError(f"invalid scenario: {exc}") from exc
    trace = run_scenario(scenario, seed=cfg.seed)
    _write_text(cfg.out, dumps_trace(trace) + "\n")
    return EXIT_OK


def _truth_config(cfg: RunConfig) -> TruthConfig:
    return TruthConfig(
        preset=cfg.preset,
        hidden_point=baseline_point(cfg.preset),
        icd_list=tuple(cfg.icds) if cfg.icds else ICD_VALUES,
        truth_granularity=cfg.truth_granularity
        or cfg.granularity
        or (FULL_GRANULARITY if cfg.paper_scale else DESK_TRUTH_GRANULARITY),
        noise_stddev=cfg.noise,
        noise_seed=cfg.noise_seed,
        workload=FULL_WORKLOAD if cfg.paper_scale else DESK_WORKLOAD,
        space=cfg.space,
    )


def cmd_ground_truth(cfg: RunConfig) -> int:
    truth = generate_ground_truth(_truth_config(cfg))
    _write_text(cfg.out, truth.dumps() + "\n")
    return EXIT_OK


def _load_truth(path) -> GroundTruthSet:
    try:
        return GroundTruthSet.from_dict(_read_json(path))
    except (AutocalError, KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"{path}: invalid ground truth: {exc}") from exc


def cmd_calibrate(cfg: RunConfig) -> int:
    if cfg.truth:
        truth = _load_truth(cfg.truth)
        labels = truth.labels
        if cfg.preset not in labels:
            cfg.preset = get_preset(labels[0]).label
    else:
        truth = generate_ground_truth(_truth_config(cfg))
    subset = truth.keys_for_icds(cfg.icds, cfg.preset) if cfg.icds else None
    simulator = None
    if cfg.external:
        simulator = ExternalSimulator(cfg.external, timeout=cfg.timeout, retries=cfg.retries)
    template = template_scenario(cfg.preset, cfg.paper_scale, cfg.granularity)
    objective = CalibrationObjective(truth, template, cfg.space, subset, simulator)
    result = run_calibration(cfg.space, objective, cfg.algorithm, cfg.budget, cfg.workers, cfg.seed, cfg.gd_config)
    out = Path(cfg.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    write_sample_log(out / f"{result.algorithm}_samples.csv", result)
    save_result(out / f"{result.algorithm}_result.json", result)
    print(format_summary(result))
    return EXIT_OK


def cmd_experiment(cfg: RunConfig) -> int:
    settings = ExperimentSettings(
        out_dir=Path(cfg.out or f"results/{cfg.experiment}"),
        presets=cfg.presets,
        algorithms=cfg.algorithms,
        budget=cfg.budget if cfg.budget_explicit else None,
        workers=cfg.workers,
        seed=cfg.seed,
        paper_scale=cfg.paper_scale,
        space=cfg.space,
    )
    if cfg.noise:
        settings.noise_stddev = cfg.noise
    if cfg.truth:
        settings.truth = _load_truth(cfg.truth)
    run_experiment(cfg.experiment, settings)
    print(f"{cfg.experiment}: results written to {settings.out_dir}")
    return EXIT_OK


def format_summary(result: CalibrationResult) -> str:
    best = result.best
    lines = [f"algorithm: {result.algorithm} (seed {result.seed})", "best point:"]
    width = max(len(n) for n in result.space.names)
    for spec in result.space:
        lines.append(f"  {spec.name:<{width}}  {human_rate(best.point[spec.name], spec.unit)}")
    lines += [
        f"MRE: {best.mre:.2f}%",
        f"MAE: {best.mae:.4g} s",
        f"evaluations: {result.evaluations}",
        f"wall time: {result.wall_time:.1f} s",
    ]
    return "\n".join(lines)


def _result_from_log(path) -> CalibrationResult:
    header = ""
    with open(path) as fh:
        first = fh.readline()
        if first.startswith("#"):
            header = first
    meta = dict(tok.split("=", 1) for tok in header[1:].split() if "=" in tok)
    samples = read_sample_log(path)
    json_path = Path(path).with_name(Path(path).name.replace("_samples.csv", "_result.json"))
    if json_path != Path(path) and json_path.is_file():
        space = load_result(json_path).space
    else:
        # no sibling result file: take units from the default space where names match
        known = {s.name: s for s in default_space(include_ram=True)}
        space = ParameterSpace(
            known.get(n) or ParameterSpec(n, "", 1.0, 2.0) for n in samples[0].point
        )
    ok = [s for s in samples if s.ok]
    if not ok:
        raise InputError(f"{path}: no successful evaluation in the sample log")
    best = min(ok, key=lambda s: (s.mre, s.index))
    return CalibrationResult(
        best=best,
        log=samples,
        algorithm=meta.get("algorithm", Path(path).stem),
        seed=int(meta.get("seed", 0)),
        evaluations=len(samples),
        space=space,
        wall_time=max(s.wall_time for s in samples),
    )


def cmd_report(cfg: RunConfig) -> int:
    for i, path in enumerate(cfg.inputs):
        try:
            if path.endswith(".json"):
                result = load_result(path)
                log_path = Path(path.replace("_result.json", "_samples.csv"))
                if log_path.is_file() and str(log_path) != path:
                    result.log = read_sample_log(log_path, result.space)
            else:
                result = _result_from_log(path)
                log_path = Path(path)
        except (ValueError, KeyError, ConfigurationError) as exc:
            raise InputError(str(exc)) from exc
        if i:
            print()
        print(f"== {path}")
        print(format_summary(result))
        if len(result.log) > 1 and log_path.is_file():
            curve = result.best_so_far()
            png = log_path.with_suffix(".png")
            plotting.plot_error_vs_time(
                {result.algorithm: ([s.wall_time for s, _, _ in curve], [m for _, m, _ in curve])},
                png,
                ylabel="Best-so-far MRE (%)",
                title=f"{result.algorithm} convergence",
            )
            print(f"convergence plot: {png}")
    return EXIT_OK


HANDLERS = {
    "simulate": cmd_simulate,
    "ground-truth": cmd_ground_truth,
    "calibrate": cmd_calibrate,
    "experiment": cmd_experiment,
    "report": cmd_report,
}


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"autocal: {exc}", file=sys.stderr)
        return EXIT_INPUT
    logging.basicConfig(
        level=logging.INFO if cfg.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return HANDLERS[cfg.command](cfg)
    except InputError as exc:
        print(f"autocal: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConfigurationError as exc:
        print(f"autocal: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AutocalError, OSError) as exc:
        print(f"autocal: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except KeyboardInterrupt:
        print("autocal: interrupted", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
