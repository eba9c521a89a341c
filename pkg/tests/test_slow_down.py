import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anosov_flex.errors import ParamDomain
from anosov_flex.slow_down import (PsiProfile, SlowDownMap, SlowDownParams, eta_ladder, flow_time_one,
                                   linear_transit_time, make_slowdown, psi0, psi_eta, residence_bound,
                                   residence_time_check, rho_cone_size)
from anosov_flex.torus_core import torus_distance_many

A, EPS, R0 = 0.25, 0.02, 0.125


def sp(eta_frac, s=0.0):
    return SlowDownParams(A, EPS, R0, eta_frac * R0 ** 2, s)


def test_psi0_examples():
    v, d = psi0(np.array([0.0, R0 ** 2 / 4 - 1e-13, R0 ** 2]), A, EPS, R0)
    assert v[0] == 0.0
    assert v[2] == pytest.approx(1.0, abs=1e-12)
    assert d[1] == pytest.approx((1 + A) / (2 ** (2 * A) * R0 ** 2), rel=1e-6)


def test_psi_eta_flat_at_top():
    v, _ = psi_eta(np.linspace(0, 1, 1001), sp(2.0))
    assert np.all(v == 1.0)


def test_psi_eta_equals_psi0_above_eta():
    u = np.linspace(R0 ** 2 / 16, 1.0, 500)
    v, _ = psi_eta(u, sp(1 / 16))
    v0, _ = psi0(u, A, EPS, R0)
    assert np.allclose(v, v0, atol=1e-12)


def test_psi_eta_monotone_in_eta():
    u = np.linspace(0, R0 ** 2 * 1.1, 2000)
    vals = [psi_eta(u, sp(f))[0] for f in (1 / 64, 1 / 16, 1 / 4, 1.0, 2.0)]
    for lo, hi in zip(vals, vals[1:]):
        assert np.all(lo <= hi + 1e-12)


@pytest.mark.parametrize("f", [2.0, 1.0, 0.25, 1 / 16, 1 / 64])
def test_profile_properties(M, f):
    assert PsiProfile(sp(f), M.Lambda).verify()["all"]


def test_params_validation():
    with pytest.raises(ParamDomain):
        SlowDownParams(0.4, EPS, R0, R0 ** 2)
    with pytest.raises(ParamDomain):
        SlowDownParams(A, EPS, R0, 3 * R0 ** 2)
    with pytest.raises(ParamDomain, match="4/3"):
        SlowDownParams(0.3, 0.2, R0, R0 ** 2)
    assert eta_ladder(R0) == [2 * R0 ** 2, R0 ** 2, R0 ** 2 / 4, R0 ** 2 / 16, R0 ** 2 / 64]


def test_flow_conserves_product(M):
    rng = np.random.default_rng(0)
    r = 0.3 * np.sqrt(rng.random(100))
    th = 2 * np.pi * rng.random(100)
    q = np.column_stack([r * np.cos(th), r * np.sin(th)])
    out, Av = flow_time_one(q, sp(1 / 16), M)
    assert np.max(np.abs(out[:, 0] * out[:, 1] - q[:, 0] * q[:, 1])) < 1e-10
    # the slowed flow keeps the weighted area du/psi, so its Jacobian is a psi ratio
    q_u, o_u = np.sum(q * q, axis=1), np.sum(out * out, axis=1)
    ratio = psi_eta(o_u, sp(1 / 16))[0] / psi_eta(q_u, sp(1 / 16))[0]
    assert np.max(np.abs(np.linalg.det(Av) - ratio)) < 1e-8
    out0, _ = flow_time_one(np.zeros((1, 2)), sp(1 / 16), M)
    assert np.all(out0 == 0.0)


def test_flow_linear_outside_slow_zone(M):
    q = np.array([[0.3, 0.01], [-0.2, -0.005]])
    out, _ = flow_time_one(q, sp(1 / 16), M)
    lam = M.Lambda
    assert np.allclose(out, q * [math.exp(lam), math.exp(-lam)], rtol=1e-9)


def test_G_matches_base_off_disk_and_at_flat(twist16):
    g = SlowDownMap(twist16, sp(1 / 16, 1.0))
    rng = np.random.default_rng(1)
    pts = rng.random((2000, 2))
    s = g.chart(pts)
    off = np.einsum("ij,ij->i", s, s) > g.r1 ** 2 * 1.01
    assert np.max(torus_distance_many(g.apply(pts[off]), twist16.apply(pts[off]))) < 1e-14
    flat = SlowDownMap(twist16, sp(2.0, 1.0))
    assert np.max(torus_distance_many(flat.apply(pts), twist16.apply(pts))) < 1e-9
    assert np.allclose(g.apply([0.0, 0.0]), 0.0)


def test_G_derivative_at_fixed_point(M, linear):
    g = make_slowdown(M, sp(1 / 16))
    J = g.derivative([0.0, 0.0])[0]
    psi0_val = psi_eta(0.0, sp(1 / 16))[0][0]
    Ei, E = M.eigenbasis.E_inv, M.eigenbasis.E
    D = Ei @ J @ E
    lam = M.Lambda
    assert np.allclose(D, np.diag([math.exp(psi0_val * lam), math.exp(-psi0_val * lam)]), atol=1e-8)


def test_G_fd_jacobian_and_det(M, twist16):
    g = SlowDownMap(twist16, sp(1 / 16, 1.0))
    rng = np.random.default_rng(5)
    # half of the sample inside the disk, where the flow acts
    inside = g.from_chart(g.r1 * 0.9 * (rng.random((100, 2)) * 2 - 1) / math.sqrt(2))
    pts = np.vstack([inside, rng.random((100, 2))])
    J = g.derivative(pts)
    h = 1e-6
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        d = g.apply(pts + e) - g.apply(pts - e)
        d -= np.round(d)
        assert np.max(np.abs(d / (2 * h) - J[:, :, k])) < 1e-5
    # det DG is the density ratio psi(u(Gp)) / psi(u(p))
    kap_p = g.density(pts)
    kap_g = g.density(g.apply(pts))
    assert np.max(np.abs(np.linalg.det(J) - kap_p / kap_g)) < 1e-8


def test_density_and_normalizer(M):
    g = make_slowdown(M, sp(1 / 16))
    far = np.array([[0.5, 0.5], [0.3, 0.7]])
    assert np.all(g.density(far) == 1.0)
    assert make_slowdown(M, sp(2.0)).normalizer() == 1.0
    assert g.normalizer() > 1.0


def test_density_is_invariant(M):
    """mu_eta(G^{-1} B) = mu_eta(B) for a box B near the slowed zone, by Monte Carlo."""
    g = make_slowdown(M, sp(1 / 4))
    rng = np.random.default_rng(7)
    pts = rng.random((100_000, 2))
    w = g.density(pts)
    lo, hi = np.array([0.02, 0.02]), np.array([0.12, 0.12])

    def in_box(p):
        return np.all((p >= lo) & (p <= hi), axis=1)

    before = w * in_box(pts)
    after = w * in_box(g.apply(pts))
    diff = after - before
    se = diff.std(ddof=1) / math.sqrt(len(pts))
    assert abs(diff.mean()) < 3 * se + 1e-12


def test_rho_limits():
    assert rho_cone_size(1e-8, 1e-8) == pytest.approx(2 - math.sqrt(3), abs=1e-6)
    by_alpha = [rho_cone_size(a, 0.01) for a in np.linspace(0.01, 0.15, 15)]
    by_eps = [rho_cone_size(0.1, e) for e in np.linspace(0.001, 0.05, 15)]
    for vals in (by_alpha, by_eps):
        assert all(b > a for a, b in zip(vals, vals[1:]))
    assert rho_cone_size(A, EPS) == pytest.approx(0.31156, abs=1e-5)


def test_residence_against_T0(M):
    g = make_slowdown(M, sp(1 / 64))
    res = residence_time_check(g, 1000, seed=3)
    assert res["pass"] and res["max_time"] < res["T0"]
    flat = residence_time_check(make_slowdown(M, sp(2.0)), 500, seed=3)
    assert flat["max_time"] <= linear_transit_time(M.Lambda, R0) + 1e-9
    assert residence_bound(0.9624236501, 0.1) == pytest.approx(3307.77365367, rel=1e-9)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 0.3), st.floats(0.005, 0.1), st.floats(0.002, 1.0))
def test_psi_eta_bounded_by_one_and_nondecreasing(alpha, eps, frac):
    try:
        q = SlowDownParams(alpha, eps, R0, frac * 2 * R0 ** 2)
    except ParamDomain:
        return
    u = np.linspace(0, 2 * R0 ** 2, 400)
    v, dv = psi_eta(u, q)
    assert np.all(v <= 1.0 + 1e-12) and np.all(v > 0)
    assert np.all(dv >= -1e-9)
