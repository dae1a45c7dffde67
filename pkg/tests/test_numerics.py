import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multicritic.numerics import (
    Schedule, TwoTimescale, default_fast, default_slow, default_two_timescale, project_policy_row,
    project_simplex, rate,
)

vectors = st.lists(st.floats(-50, 50, allow_nan=False), min_size=1, max_size=8)


def simplex_grid(dim, steps):
    """All points of the probability simplex with coordinates in multiples of 1/steps."""
    pts = [c for c in itertools.product(range(steps + 1), repeat=dim - 1) if sum(c) <= steps]
    pts = np.array(pts, dtype=np.float64)
    return np.column_stack([pts, steps - pts.sum(axis=1)]) / steps


def brute_force_projection(v, grid):
    return grid[np.argmin(((grid - v) ** 2).sum(axis=1))]


def test_inverse_time_values():
    s = Schedule("inverse-time", 1.0, 1.0, 1)
    assert rate(s, 0) == 1.0
    assert rate(s, 9) == pytest.approx(0.1)


def test_power_law_decreasing():
    s = Schedule("power-law", 1.0, 0.6, 1)
    assert s.rate(0) == 1.0
    r = [s.rate(t) for t in range(1000)]
    assert all(a > b for a, b in zip(r, r[1:]))


def test_partial_sums_by_direct_summation():
    s = Schedule("inverse-time", 1.0, 1.0, 1)
    t = np.arange(10**6)
    rates = np.array([s.rate(int(x)) for x in t[:1000]])
    assert np.allclose(rates, 1.0 / (t[:1000] + 1))
    full = 1.0 / (t + 1.0)
    assert math.fsum(full**2) < math.pi**2 / 6 + 1e-9
    assert math.fsum(full) > 13.8


def test_constant_schedule_is_flagged():
    s = Schedule("constant-for-testing", 0.3)
    assert s.rate(0) == s.rate(10**6) == 0.3
    assert not s.conformant
    assert default_fast().conformant and default_slow().conformant


@pytest.mark.parametrize("kwargs", [
    dict(form="bogus"), dict(scale=0.0), dict(offset=0),
    dict(form="inverse-time", exponent=0.7), dict(form="power-law", exponent=0.5),
])
def test_schedule_rejects_bad_parameters(kwargs):
    with pytest.raises(ValueError):
        Schedule(**kwargs)


def test_relative_form():
    s = Schedule.relative(250, 0.6, 0.1)
    assert s.rate(0) == pytest.approx(0.1)
    assert s.rate(250) == pytest.approx(0.1 * 2**-0.6)


def test_default_two_timescale_ratio():
    tt = default_two_timescale()
    assert tt.check() == []
    t = np.arange(1, 10**6 + 1, dtype=float)
    ratio = (tt.slow.scale / (t + tt.slow.offset)) / (tt.fast.scale / (t + tt.fast.offset) ** tt.fast.exponent)
    assert ratio.max() < 1
    assert np.all(np.diff(ratio) <= 0)


def test_two_timescale_detects_violations():
    same = Schedule("inverse-time", 1.0)
    assert TwoTimescale(same, same).check(100)
    growing = TwoTimescale(Schedule("inverse-time", 1.0), Schedule("power-law", 0.1, 0.9))
    assert any("increases" in p for p in growing.check(10**5))


def test_feasible_input_returned_exactly():
    assert project_simplex([0.2, 0.3, 0.5]).tolist() == [0.2, 0.3, 0.5]


def test_uniform_shift():
    # KKT: both coordinates stay positive, shift each by (1.2 - 1)/2
    assert project_simplex([0.6, 0.6]) == pytest.approx([0.5, 0.5], abs=1e-15)


def test_clipped_pair_against_brute_force():
    grid = simplex_grid(2, 1000)
    expected = brute_force_projection(np.array([1.5, -0.5]), grid)
    assert expected.tolist() == [1.0, 0.0]
    assert project_simplex([1.5, -0.5]).tolist() == [1.0, 0.0]


def test_policy_row_negative_coordinate_against_brute_force():
    v = np.array([0.5, 0.4, -0.1, 0.2])
    # the exact answer lies on this grid (multiples of 1/60)
    expected = brute_force_projection(v, simplex_grid(4, 60))
    assert project_policy_row(v) == pytest.approx(expected, abs=1e-12)
    assert project_policy_row(v)[2] == 0.0


def test_policy_row_examples():
    assert project_policy_row([0.25] * 4).tolist() == [0.25] * 4
    assert project_policy_row([2, 0, 0, 0]).tolist() == [1, 0, 0, 0]


def test_empty_and_nonfinite_rejected():
    with pytest.raises(ValueError):
        project_simplex([])
    with pytest.raises(ValueError):
        project_simplex([np.nan, 1.0])


@given(vectors)
def test_projection_lands_on_simplex(v):
    p = project_simplex(v)
    assert abs(p.sum() - 1) <= 1e-9
    assert p.min() >= 0.0


@given(vectors)
def test_projection_idempotent(v):
    p = project_simplex(v)
    assert np.array_equal(project_simplex(p), p)


@given(vectors)
def test_projection_satisfies_kkt(v):
    # p = max(v - theta, 0): equal shift on the support, v <= theta off it
    v = np.asarray(v)
    p = project_simplex(v)
    support = p > 0
    shifts = v[support] - p[support]
    theta = shifts.mean()
    assert np.allclose(shifts, theta, atol=1e-9)
    assert np.all(v[~support] <= theta + 1e-9)


@settings(max_examples=200)
@given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=3, max_size=3))
def test_projection_no_grid_point_closer(v):
    v = np.asarray(v)
    grid = _GRID3
    p = project_simplex(v)
    best = np.min(((grid - v) ** 2).sum(axis=1))
    assert ((p - v) ** 2).sum() <= best + 1e-12


_GRID3 = simplex_grid(3, 200)
