import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anosov_flex.errors import IncompleteSet, TooManyPoints
from anosov_flex.exponents import (ExponentEstimate, PeriodicOrbitSet, abs_floor, enumerate_fixed_points_linear,
                                   expansion_constant_mme, exponent_from_pressure, lefschetz_count,
                                   lyap_abs_birkhoff, lyap_mme_periodic, lyap_quadrature, lyap_stable_birkhoff,
                                   mme_lower_bound, periodic_set, pressure, pressure_curve, pressure_slope)
from anosov_flex.torus_core import HyperbolicMatrix
from anosov_flex.twist_map import default_twist_params


def test_lefschetz_small_periods(M):
    assert [lefschetz_count(M, n) for n in range(1, 7)] == [1, 5, 16, 45, 121, 320]


def test_fixed_points_exact(M):
    one = enumerate_fixed_points_linear(M, 1)
    assert one.exact == [(Fraction(0), Fraction(0))]
    two = enumerate_fixed_points_linear(M, 2)
    assert two.count_expected == 5 and two.complete
    A2 = np.array([[5, 3], [3, 2]])
    for x, y in two.exact:
        img = A2 @ np.array([x, y], dtype=object)
        assert all(v.denominator == 1 for v in img - np.array([x, y], dtype=object))
    with pytest.raises(TooManyPoints):
        enumerate_fixed_points_linear(M, 12, cap=1000)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 4), st.integers(1, 4), st.integers(1, 5))
def test_fixed_point_count_matches_lefschetz(a, b, c, n):
    # d chosen to make det = 1; only hyperbolic matrices are kept
    if (1 + b * c) % a:
        return
    d = (1 + b * c) // a
    if a + d <= 2:
        return
    M = HyperbolicMatrix(a, b, c, d)
    if lefschetz_count(M, n) > 20_000:
        return
    s = enumerate_fixed_points_linear(M, n)
    assert len(s.points) == lefschetz_count(M, n)
    assert len({(round(x, 12), round(y, 12)) for x, y in s.points}) == len(s.points)


def test_linear_mme_and_pressure(M, golden_lambda):
    s8 = enumerate_fixed_points_linear(M, 8)
    est = lyap_mme_periodic(s8)
    assert est.value == pytest.approx(golden_lambda, abs=1e-10)
    # P(0) = log(#Fix)/n and P(1) = P(0) - Lambda for the constant potential
    assert pressure(s8, 0.0) == pytest.approx(math.log(lefschetz_count(M, 8)) / 8, abs=1e-12)
    assert pressure(s8, 1.0) == pytest.approx(pressure(s8, 0.0) - golden_lambda, abs=1e-12)
    assert abs(pressure(s8, 0.0) - golden_lambda) < 2e-2
    assert abs(pressure(s8, 1.0)) < 2e-2


def test_pressure_toy():
    toy = PeriodicOrbitSet(2, np.zeros((2, 2)), np.array([math.log(2.0), math.log(8.0)]), 2)
    t = 0.5
    want = math.log(2 ** -t + 8 ** -t) / 2
    assert pressure(toy, t) == pytest.approx(want, abs=1e-14)
    est = exponent_from_pressure(toy, t)
    assert est.value == pytest.approx(-pressure_slope(toy, t), abs=1e-6)
    curve = pressure_curve(toy)
    assert np.all(curve.second_differences() >= -1e-12)
    with pytest.raises(IncompleteSet):
        pressure(PeriodicOrbitSet(2, np.zeros((1, 2)), np.zeros(1), 2), 0.0)


def test_quadrature_linear(linear, golden_lambda):
    est = lyap_quadrature(linear, grid_n=512)
    assert est.value == pytest.approx(golden_lambda, abs=1e-4)


def test_birkhoff_linear_and_sum(linear, twist4, golden_lambda):
    est = lyap_abs_birkhoff(linear, n_orbits=8, n_iters=2000, burn_in=100)
    assert est.value == pytest.approx(golden_lambda, abs=1e-9)
    fwd = lyap_abs_birkhoff(twist4, n_orbits=16, n_iters=5000, burn_in=200, rng_seed=1)
    back = lyap_stable_birkhoff(twist4, n_orbits=16, n_iters=5000, burn_in=200, rng_seed=1)
    # area preservation: lambda_u + lambda_s = 0
    assert abs(fwd.value + back.value) < 3 * math.hypot(fwd.std_error, back.std_error) + 1e-3


def test_birkhoff_is_seed_deterministic(twist4):
    a = lyap_abs_birkhoff(twist4, n_orbits=4, n_iters=500, burn_in=10, rng_seed=9)
    b = lyap_abs_birkhoff(twist4, n_orbits=4, n_iters=500, burn_in=10, rng_seed=9)
    assert a == b


def test_twist_periodic_set_continuation(M, twist4):
    s = periodic_set(twist4, 5, steps=10)
    assert s.complete
    img = twist4.iterate(s.points, 5)
    d = img - s.points
    d -= np.round(d)
    assert np.max(np.abs(d)) < 1e-9
    # each continued point is distinct
    assert len({(round(x, 9), round(y, 9)) for x, y in s.points}) == lefschetz_count(M, 5)


def test_estimate_validation():
    with pytest.raises(ValueError):
        ExponentEstimate(1.0, 0.0, 1, 1, "guess")
    with pytest.raises(ValueError):
        ExponentEstimate(1.0, -1.0, 1, 1, "birkhoff")


def test_bounds(M):
    p16 = default_twist_params(M, 1 / 16)
    p4 = default_twist_params(M, 1 / 4)
    assert abs_floor(M, p16) < M.Lambda
    assert expansion_constant_mme(M, p16.beta) == pytest.approx(0.354, abs=1e-3)
    # at a fixed mass the bound grows as the fast slope steepens
    assert mme_lower_bound(M, p16, 0.5) > mme_lower_bound(M, p4, 0.5)
    assert mme_lower_bound(M, p16, 0.0) == pytest.approx(math.log(expansion_constant_mme(M, p16.beta)))
