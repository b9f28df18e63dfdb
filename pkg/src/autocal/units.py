"""Rate unit conversions.  Internally bandwidths are byte/s and speeds flop/s."""

from __future__ import annotations

from .errors import ConfigurationError

_PREFIX = {"": 1.0, "k": 1e3, "K": 1e3, "M": 1e6, "G": 1e9, "T": 1e12}

# unit -> (kind, factor to the base unit of that kind)
_UNITS = {}
for _p, _f in _PREFIX.items():
    _UNITS[f"{_p}byte/s"] = ("data", _f)
    _UNITS[f"{_p}B/s"] = ("data", _f)
    _UNITS[f"{_p}Bps"] = ("data", _f)
    _UNITS[f"{_p}bit/s"] = ("data", _f / 8.0)
    _UNITS[f"{_p}bps"] = ("data", _f / 8.0)
    _UNITS[f"{_p}flop/s"] = ("compute", _f)
    _UNITS[f"{_p}flops"] = ("compute", _f)
del _p, _f


def unit_kind(unit: str) -> str:
    try:
        return _UNITS[unit][0]
    except KeyError:
        raise ConfigurationError(f"unknown unit {unit!r}") from None


def to_base(value: float, unit: str) -> float:
    """Convert ``value`` in ``unit`` to byte/s (data) or flop/s (compute)."""
    try:
        return float(value) * _UNITS[unit][1]
    except KeyError:
        raise ConfigurationError(f"unknown unit {unit!r}") from None


def from_base(value: float, unit: str) -> float:
    try:
        return float(value) / _UNITS[unit][1]
    except KeyError:
        raise ConfigurationError(f"unknown unit {unit!r}") from None


def human_rate(value: float, unit: str) -> str:
    """Format a physical value for reports, e.g. ``1.97 Gflop/s``."""
    for prefix, scale in (("T", 1e12), ("G", 1e9), ("M", 1e6), ("k", 1e3)):
        if abs(value) >= scale:
            return f"{value / scale:.4g} {prefix}{unit}"
    return f"{value:.4g} {unit}"
