"""Run an external simulator as a subprocess speaking the JSON wire protocol.

The command receives one scenario JSON document on stdin and must print one
trace JSON document on stdout, exiting 0.  Anything else is reported as an
:class:`~autocal.errors.EvaluationError` whose ``status`` is one of
``spawn_error``, ``timeout``, ``exit_error`` or ``parse_error``.
"""

from __future__ import annotations

import json
import shlex
import subprocess
import sys

from .calibrate.objective import CalibrationObjective
from .engine import Scenario, Trace, scenario_to_dict, trace_from_dict
from .errors import ConfigurationError, EvaluationError

DEFAULT_EXPECTED_RUNTIME = 1.0


def builtin_command() -> list[str]:
    """Command line that runs this package's own engine over the wire protocol."""
    return [sys.executable, "-m", "autocal", "simulate", "--scenario", "-", "--out", "-"]


class ExternalSimulator:
    def __init__(
        self,
        command,
        timeout: float | None = None,
        expected_runtime: float = DEFAULT_EXPECTED_RUNTIME,
        retries: int = 0,
        env: dict | None = None,
    ):
        if isinstance(command, str):
            command = shlex.split(command)
        self.command = list(command)
        if not self.command:
            raise ConfigurationError("external simulator command is empty")
        if retries < 0:
            raise ConfigurationError("retries must be >= 0")
        # default timeout: ten times the expected run time
        self.timeout = timeout if timeout is not None else 10.0 * expected_runtime
        self.retries = retries
        self.env = env

    def _once(self, payload: str) -> Trace:
        try:
            proc = subprocess.run(
                self.command,
                input=payload,
                capture_output=True,
                text=True,
                timeout=self.timeout,
                env=self.env,
            )
        except subprocess.TimeoutExpired:
            raise EvaluationError("timeout", f"no answer within {self.timeout:g} s") from None
        except OSError as exc:
            raise EvaluationError("spawn_error", str(exc)) from None
        if proc.returncode != 0:
            tail = proc.stderr.strip().splitlines()[-1:] if proc.stderr else []
            raise EvaluationError("exit_error", f"exit code {proc.returncode} {' '.join(tail)}".strip())
        try:
            return trace_from_dict(json.loads(proc.stdout))
        except (json.JSONDecodeError, ConfigurationError, TypeError, AttributeError) as exc:
            raise EvaluationError("parse_error", str(exc)) from None

    def __call__(self, scenario: Scenario) -> Trace:
        payload = json.dumps(scenario_to_dict(scenario))
        for attempt in range(self.retries + 1):
            try:
                return self._once(payload)
            except EvaluationError as exc:
                if exc.status == "spawn_error" or attempt == self.retries:
                    raise
        raise AssertionError("unreachable")


def external_objective(command, truth, template, space=None, subset=None, **kwargs):
    """Calibration objective whose simulations run through ``command``."""
    return CalibrationObjective(truth, template, space, subset, ExternalSimulator(command, **kwargs))
