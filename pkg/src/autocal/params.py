"""Calibration parameters and the log2-normalized coordinates searched over.

Every parameter is a positive rate with a range ``[low, high]``.  Search
algorithms never see physical values: they work on ``[0, 1]^p`` where a
coordinate ``u`` maps to ``2 ** (log2(low) + u * (log2(high) - log2(low)))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import ConfigurationError, RangeViolation

# Tolerance for values that land a hair outside their range after a
# float roundtrip (e.g. 2 ** log2(high)).
_REL_SLACK = 1e-12


@dataclass(frozen=True)
class ParameterSpec:
    name: str
    unit: str
    low: float
    high: float

    def __post_init__(self):
        if not self.name or not str(self.name).isidentifier():
            raise ConfigurationError(f"invalid parameter name {self.name!r}")
        if not (self.low > 0):
            raise ConfigurationError(f"parameter {self.name!r}: low must be > 0, got {self.low}")
        if not (self.high > self.low):
            raise ConfigurationError(
                f"parameter {self.name!r}: high ({self.high}) must exceed low ({self.low})"
            )

    @property
    def log_low(self) -> float:
        return math.log2(self.low)

    @property
    def log_span(self) -> float:
        return math.log2(self.high) - math.log2(self.low)

    def to_dict(self) -> dict:
        return {"name": self.name, "unit": self.unit, "low": self.low, "high": self.high}


class ParameterSpace:
    """Ordered, immutable collection of :class:`ParameterSpec`."""

    def __init__(self, specs: Iterable[ParameterSpec]):
        specs = tuple(specs)
        if not specs:
            raise ConfigurationError("a parameter space needs at least one parameter")
        names = [s.name for s in specs]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise ConfigurationError(f"duplicate parameter names: {dupes}")
        self._specs = specs
        self._index = {s.name: i for i, s in enumerate(specs)}

    @property
    def specs(self) -> tuple[ParameterSpec, ...]:
        return self._specs

    @property
    def names(self) -> list[str]:
        return [s.name for s in self._specs]

    @property
    def dim(self) -> int:
        return len(self._specs)

    def __len__(self):
        return len(self._specs)

    def __iter__(self):
        return iter(self._specs)

    def __getitem__(self, name: str) -> ParameterSpec:
        return self._specs[self._index[name]]

    def __eq__(self, other):
        return isinstance(other, ParameterSpace) and self._specs == other._specs

    def __hash__(self):
        return hash(self._specs)

    def __repr__(self):
        return f"ParameterSpace({list(self._specs)!r})"

    def to_list(self) -> list[dict]:
        return [s.to_dict() for s in self._specs]

    @classmethod
    def from_list(cls, items: Iterable[Mapping]) -> "ParameterSpace":
        try:
            return cls(
                ParameterSpec(str(d["name"]), str(d.get("unit", "")), float(d["low"]), float(d["high"]))
                for d in items
            )
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"malformed parameter list: {exc}") from exc


# A Point is a plain name -> physical value mapping; a NormPoint is a tuple of
# floats in [0, 1], ordered like the space.
Point = dict
NormPoint = tuple


def validate_point(space: ParameterSpace, point: Mapping[str, float]) -> None:
    missing = [n for n in space.names if n not in point]
    extra = [n for n in point if n not in space._index]
    if missing or extra:
        raise ConfigurationError(f"point keys mismatch: missing {missing}, unexpected {extra}")
    for spec in space:
        v = point[spec.name]
        if not (spec.low * (1 - _REL_SLACK) <= v <= spec.high * (1 + _REL_SLACK)):
            raise RangeViolation(spec.name, v, spec.low, spec.high)


def normalize(space: ParameterSpace, point: Mapping[str, float]) -> NormPoint:
    validate_point(space, point)
    coords = []
    for spec in space:
        u = (math.log2(point[spec.name]) - spec.log_low) / spec.log_span
        coords.append(min(1.0, max(0.0, u)))
    return tuple(coords)


def denormalize(space: ParameterSpace, coords: Iterable[float]) -> Point:
    coords = tuple(float(c) for c in coords)
    if len(coords) != space.dim:
        raise ConfigurationError(f"expected {space.dim} coordinates, got {len(coords)}")
    out = {}
    for spec, u in zip(space, coords):
        if not (0.0 <= u <= 1.0):
            raise RangeViolation(spec.name, u, 0.0, 1.0)
        if u == 0.0:
            out[spec.name] = spec.low
        elif u == 1.0:
            out[spec.name] = spec.high
        else:
            out[spec.name] = 2.0 ** (spec.log_low + u * spec.log_span)
    return out


def sample_uniform(space: ParameterSpace, rng: np.random.Generator) -> NormPoint:
    """Draw one point uniformly from the unit cube (log-uniform in physical units)."""
    return tuple(float(u) for u in rng.random(space.dim))


def clamp(coords: Iterable[float]) -> NormPoint:
    return tuple(min(1.0, max(0.0, float(c))) for c in coords)
