import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anosov_flex.errors import ParamDomain
from anosov_flex.torus_core import a_of_t, torus_distance_many
from anosov_flex.twist_map import (LinearMap, StripRegions, TwistMap, TwistParams, default_twist_params,
                                   f_mollified, f_mollified_deriv, f_piecewise, twist_apply, twist_derivative,
                                   twist_inverse)


@pytest.fixture(scope="module")
def p(M):
    return default_twist_params(M, 1 / 16)


def test_piecewise_identity_outside_strip(p):
    x = np.array([0.0, 0.1, 0.3, 0.7, 0.95])
    assert np.array_equal(f_piecewise(x, p), x)


def test_piecewise_continuous_at_breakpoint(p):
    x0 = p.m + p.l - p.delta
    expect = (1 - p.beta) * x0 + p.beta * p.m
    assert f_piecewise(x0, p) == pytest.approx(expect, abs=1e-15)
    assert f_piecewise(x0 + 1e-13, p) == pytest.approx(expect, abs=1e-10)


def test_piecewise_fast_slope(p):
    a, b = p.m + p.l - 0.75 * p.delta, p.m + p.l - 0.25 * p.delta
    slope = (f_piecewise(b, p) - f_piecewise(a, p)) / (b - a)
    assert slope == pytest.approx((p.beta * p.l + p.delta * (1 - p.beta)) / p.delta, rel=1e-12)


def test_mollified_values(p):
    assert f_mollified_deriv(p.m + p.l / 2, p) == 1 - p.beta
    assert f_mollified(0.0, p) == 0.0
    xs = (np.arange(20000) + 0.5) / 20000
    assert np.mean(f_mollified_deriv(xs, p)) == pytest.approx(1.0, abs=1e-6)


def test_mollified_matches_piecewise_away_from_corners(p):
    reg = StripRegions.of(p)
    x = np.linspace(*reg.S2_w, 50)[1:-1]
    assert np.allclose(f_mollified(x, p), f_piecewise(x, p), atol=1e-12)


def test_params_validation(M):
    with pytest.raises(ParamDomain):
        TwistParams(m=0.375, l=0.25, delta=0.3, beta=0.5)
    with pytest.raises(ParamDomain):
        TwistParams(m=0.375, l=0.25, delta=0.1, beta=0.5, w=0.03)
    from anosov_flex.torus_core import HyperbolicMatrix

    # trace 4, |b| = 3: beta must stay below 2/3
    with pytest.raises(ParamDomain, match="beta"):
        TwistParams(m=0.375, l=0.25, delta=0.1, beta=0.9).check_against(HyperbolicMatrix(2, 3, 1, 2))


def test_twist_equals_linear_off_strip(M, p):
    rng = np.random.default_rng(1)
    pts = rng.random((500, 2))
    pts[:, 0] = np.where(pts[:, 0] < 0.5, pts[:, 0] * 0.6, 0.64 + pts[:, 0] * 0.35)
    pts = pts[(pts[:, 0] < p.m - p.w) | (pts[:, 0] > p.m + p.l + p.w)]
    tw = TwistMap(M, p).apply(pts)
    lin = LinearMap(M).apply(pts)
    assert np.max(torus_distance_many(tw, lin)) < 1e-14
    assert np.allclose(twist_apply((0, 0), p, M).array, (0, 0))


def test_derivative_table_examples(M, p):
    assert np.array_equal(twist_derivative((0.1, 0.3), p, M), M.array)
    x = sum(StripRegions.of(p).S2_w) / 2
    assert np.allclose(twist_derivative((x, 0.2), p, M), a_of_t(M, p.fast_slope), atol=1e-12)


def test_small_beta_approaches_linear(M):
    q = TwistParams(m=0.375, l=0.25, delta=0.0625, beta=1e-6, w=0.0078125)
    g = (np.arange(100) + 0.5) / 100
    X, Y = np.meshgrid(g, g)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    assert np.max(torus_distance_many(TwistMap(M, q).apply(pts), LinearMap(M).apply(pts))) < 1e-4


def test_fd_jacobian(twist16):
    rng = np.random.default_rng(2)
    pts = rng.random((200, 2))
    J = twist16.derivative(pts)
    h = 1e-7
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        d = (twist16.apply(pts + e) - twist16.apply(pts - e))
        d -= np.round(d)
        assert np.max(np.abs(d / (2 * h) - J[:, :, k])) < 1e-6


def test_inverse_round_trip(twist16, M):
    rng = np.random.default_rng(3)
    pts = rng.random((1000, 2))
    back = twist16.inverse(twist16.apply(pts))
    assert np.max(torus_distance_many(back, pts)) < 1e-10
    assert np.allclose(twist_inverse((0, 0), twist16.params, M).array, (0, 0))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 1.0), st.floats(0.05, 0.6), st.floats(0.0, 0.24))
def test_det_one_everywhere(frac, beta, wf):
    from anosov_flex.torus_core import HyperbolicMatrix

    M = HyperbolicMatrix(2, 1, 1, 1)
    q = default_twist_params(M, frac, beta=beta, w_frac=wf)
    pts = np.random.default_rng(0).random((64, 2))
    J = TwistMap(M, q).derivative(pts)
    assert np.max(np.abs(np.linalg.det(J) - 1.0)) < 1e-8
