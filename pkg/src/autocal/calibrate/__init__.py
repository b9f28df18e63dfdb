from .algorithms import (
    ALGORITHMS,
    Calibrator,
    Candidate,
    GdConfig,
    GradientDescent,
    GridSearch,
    RandomSearch,
    forward_gradient,
    make_calibrator,
)
from .evaluator import (
    Budget,
    CalibrationResult,
    Sample,
    format_sample_log,
    load_result,
    read_sample_log,
    run_calibration,
    save_result,
    write_sample_log,
)
from .objective import CalibrationObjective, evaluate_objective

__all__ = [
    "ALGORITHMS",
    "Budget",
    "CalibrationObjective",
    "CalibrationResult",
    "Calibrator",
    "Candidate",
    "GdConfig",
    "GradientDescent",
    "GridSearch",
    "RandomSearch",
    "Sample",
    "evaluate_objective",
    "format_sample_log",
    "forward_gradient",
    "load_result",
    "make_calibrator",
    "read_sample_log",
    "run_calibration",
    "save_result",
    "write_sample_log",
]
