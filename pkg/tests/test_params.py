import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from autocal.errors import ConfigurationError, RangeViolation
from autocal.params import (
    ParameterSpace,
    ParameterSpec,
    clamp,
    denormalize,
    normalize,
    sample_uniform,
    validate_point,
)

LOW, HIGH = 2.0**20, 2.0**36


def space(p=1):
    return ParameterSpace(ParameterSpec(f"x{i}", "byte/s", LOW, HIGH) for i in range(p))


@pytest.mark.parametrize("value,expected", [(2.0**20, 0.0), (2.0**28, 0.5), (2.0**24, 0.25)])
def test_normalize_examples(value, expected):
    assert normalize(space(), {"x0": value}) == pytest.approx((expected,), abs=1e-15)


def test_denormalize_endpoints_exact():
    sp = space(3)
    assert denormalize(sp, (0, 0, 0)) == {"x0": LOW, "x1": LOW, "x2": LOW}
    assert denormalize(sp, (1, 1, 1)) == {"x0": HIGH, "x1": HIGH, "x2": HIGH}


def test_denormalize_rejects_out_of_range():
    with pytest.raises(RangeViolation):
        denormalize(space(), (1.2,))
    with pytest.raises(RangeViolation):
        denormalize(space(), (-0.01,))


def test_validate_point_rejects_out_of_range_and_missing():
    with pytest.raises(RangeViolation):
        validate_point(space(), {"x0": 10.0})
    with pytest.raises((ConfigurationError, KeyError)):
        validate_point(space(), {"y": LOW})


def test_roundtrip_random_points():
    sp = space(4)
    rng = np.random.default_rng(11)
    for _ in range(1000):
        point = dict(zip(sp.names, 2.0 ** rng.uniform(20, 36, size=4)))
        back = denormalize(sp, normalize(sp, point))
        for n in sp.names:
            assert math.isclose(back[n], point[n], rel_tol=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=20.0, max_value=36.0))
def test_roundtrip_property(exp):
    sp = space()
    v = 2.0**exp
    assert math.isclose(denormalize(sp, normalize(sp, {"x0": v}))["x0"], v, rel_tol=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.floats(min_value=20.0, max_value=35.9), st.floats(min_value=1e-6, max_value=0.1))
def test_normalize_strictly_monotone(exp, bump):
    sp = space()
    a = normalize(sp, {"x0": 2.0**exp})[0]
    b = normalize(sp, {"x0": 2.0 ** min(36.0, exp + bump)})[0]
    assert b > a


def test_sample_uniform_seeded_and_in_unit_cube():
    sp = space(3)
    a = [sample_uniform(sp, r) for r in [np.random.default_rng(5)] for _ in range(50)]
    r2 = np.random.default_rng(5)
    b = [sample_uniform(sp, r2) for _ in range(50)]
    assert a == b
    assert all(0.0 <= u <= 1.0 for pt in a for u in pt)


def test_log_uniform_mean():
    sp = space()
    rng = np.random.default_rng(0)
    logs = [math.log2(denormalize(sp, sample_uniform(sp, rng))["x0"]) for _ in range(10_000)]
    assert abs(sum(logs) / len(logs) - 28.0) <= 0.5


def test_space_validation():
    with pytest.raises(ConfigurationError):
        ParameterSpec("x", "byte/s", 0.0, 1.0)
    with pytest.raises(ConfigurationError):
        ParameterSpec("x", "byte/s", 2.0, 1.0)
    with pytest.raises(ConfigurationError):
        ParameterSpace([ParameterSpec("x", "", 1, 2), ParameterSpec("x", "", 1, 2)])
    with pytest.raises(ConfigurationError):
        ParameterSpace([])


def test_space_serialization_roundtrip():
    sp = space(2)
    assert ParameterSpace.from_list(sp.to_list()) == sp


def test_clamp():
    assert clamp([-0.5, 0.5, 1.5]) == (0.0, 0.5, 1.0)
