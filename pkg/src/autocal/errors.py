"""Exception hierarchy shared by the engine, metrics and calibration layers."""


class AutocalError(Exception):
    """Base class for all errors raised by this package."""


class RangeViolation(AutocalError, ValueError):
    """A physical value or normalized coordinate lies outside its range."""

    def __init__(self, name, value, low, high):
        self.name = name
        self.value = value
        super().__init__(f"parameter {name!r}: {value!r} outside [{low!r}, {high!r}]")


class ConfigurationError(AutocalError, ValueError):
    pass


class GranularityError(AutocalError):
    """Raised when a scenario would generate more events than allowed."""


class EmptyTraceError(AutocalError, ValueError):
    pass


class MissingScenarioError(AutocalError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class InvalidTruthError(AutocalError, ValueError):
    pass


class CalibrationFailedError(AutocalError):
    pass


class EvaluationError(AutocalError):
    """An objective evaluation failed; ``status`` ends up in the sample log."""

    def __init__(self, status, message=""):
        self.status = status
        super().__init__(f"{status}: {message}" if message else status)
