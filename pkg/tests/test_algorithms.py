import itertools
import math

import numpy as np
import pytest

from autocal.calibrate import GdConfig, GradientDescent, GridSearch, RandomSearch, make_calibrator
from autocal.calibrate.algorithms import forward_gradient, probe_offset
from autocal.errors import ConfigurationError


def drive(calib, f, n):
    """Sequential ask/tell loop; returns the list of evaluated points."""
    seen = []
    for _ in range(n):
        c = calib.ask()
        seen.append(c.norm)
        calib.tell(c, f(c.norm))
    return seen


def grid_points(p, n):
    g = GridSearch(p)
    return drive(g, lambda x: 0.0, n)


def test_grid_1d_sequence():
    assert grid_points(1, 5) == [(0.0,), (1.0,), (0.5,), (0.25,), (0.75,)]


def test_grid_2d_corners_then_lattice():
    pts = grid_points(2, 9)
    assert set(pts[:4]) == set(itertools.product((0.0, 1.0), repeat=2))
    assert set(pts) == set(itertools.product((0.0, 0.5, 1.0), repeat=2))


def test_grid_4d_level0_is_corners():
    assert set(grid_points(4, 16)) == set(itertools.product((0.0, 1.0), repeat=4))


@pytest.mark.parametrize("p,level", [(1, 3), (2, 2), (3, 2)])
def test_grid_counts_and_no_duplicates(p, level):
    n = (2**level + 1) ** p
    pts = grid_points(p, n)
    assert len(set(pts)) == n
    axis = [k / 2**level for k in range(2**level + 1)]
    assert set(pts) == set(itertools.product(axis, repeat=p))


def test_random_seeded_and_in_cube():
    a = drive(RandomSearch(3, seed=7), lambda x: 1.0, 30)
    b = drive(RandomSearch(3, seed=7), lambda x: 1.0, 30)
    assert a == b
    assert all(0.0 <= u <= 1.0 for x in a for u in x)


def test_running_minimum():
    r = RandomSearch(2, seed=0)
    for v in (5.0, 3.0, 4.0):
        r.tell(r.ask(), v)
    assert r.best_value == 3.0


def test_gd_probe_emission():
    gd = GradientDescent(3, seed=1)
    start = gd.ask()
    gd.tell(start, 10.0)
    probes = [gd.ask() for _ in range(3)]
    for i, c in enumerate(probes):
        expected = list(start.norm)
        expected[i] += 1e-4
        assert c.norm == pytest.approx(tuple(expected), abs=1e-15)
        assert c.path_id == start.path_id


def test_probe_steps_backward_at_upper_bound():
    assert probe_offset(0.5, 1e-4) == 1e-4
    assert probe_offset(1.0, 1e-4) == -1e-4


def quad(x):
    return sum((xi - 0.3) ** 2 for xi in x)


def test_gd_reaches_quadratic_minimum():
    # the default epsilon is sized for MRE in percent; this objective lives below 0.1
    gd = GradientDescent(2, seed=0, config=GdConfig(epsilon=1e-9))
    best_on_first_path = math.inf
    for _ in range(200):
        c = gd.ask()
        v = quad(c.norm)
        gd.tell(c, v)
        if c.path_id == 0:
            best_on_first_path = min(best_on_first_path, v)
    assert best_on_first_path < 1e-3


def test_gd_epsilon_terminates_path():
    gd = GradientDescent(1, seed=0)
    first = gd.ask()
    gd.tell(first, 1.0)
    probe = gd.ask()
    gd.tell(probe, 1.0 + 1e-6)  # small positive slope, descent goes toward lower x
    trial = gd.ask()
    assert trial.tag[0] == "trial"
    gd.tell(trial, 1.0 - 0.005)  # accepted, but improves by less than epsilon
    nxt = gd.ask()
    assert nxt.path_id == first.path_id + 1
    assert nxt.tag[0] == "start"
    expected = tuple(np.random.default_rng([0, 1]).random(1))
    assert nxt.norm == expected


def test_forward_gradient_matches_analytic():
    rng = np.random.default_rng(3)
    for _ in range(20):
        x = rng.random(4) * 0.9
        g = forward_gradient(quad, x, 1e-4)
        analytic = 2 * (x - 0.3)
        assert np.max(np.abs(np.asarray(g) - analytic)) <= 5e-3


def test_gdfix_and_gddyn_agree_on_convex_1d():
    f = lambda x: (x[0] - 0.62) ** 2 + 0.1  # noqa: E731
    results = []
    for dyn in (False, True):
        gd = GradientDescent(1, seed=4, config=GdConfig(dynamic_delta=dyn, epsilon=1e-9))
        drive(gd, f, 150)
        results.append(gd.best_norm[0])
    assert abs(results[0] - results[1]) <= 0.01
    assert abs(results[0] - 0.62) <= 0.01


def test_gd_tolerates_out_of_order_tells():
    gd = GradientDescent(2, seed=0)
    s = gd.ask()
    gd.tell(s, quad(s.norm))
    p0, p1 = gd.ask(), gd.ask()
    gd.tell(p1, quad(p1.norm))
    gd.tell(p0, quad(p0.norm))
    assert gd.ask().tag[0] == "trial"


def test_gd_failed_start_opens_new_path():
    gd = GradientDescent(2, seed=0)
    s = gd.ask()
    gd.tell(s, math.inf)
    assert gd.ask().path_id == s.path_id + 1


def test_make_calibrator():
    assert make_calibrator("GDDyn", 2).name == "gddyn"
    assert make_calibrator("gdfix", 2).name == "gdfix"
    with pytest.raises(ConfigurationError):
        make_calibrator("annealing", 2)
