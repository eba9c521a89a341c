import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anosov_flex.errors import NoConvergence, TraceTooSmall
from anosov_flex.hyperbolicity import (Cone, certify, cone_from_beta, cone_K, cone_rays, default_cones,
                                       directions, min_expansion, splitting_angle, stable_direction,
                                       unstable_direction)
from anosov_flex.slow_down import SlowDownMap, SlowDownParams
from anosov_flex.torus_core import HyperbolicMatrix, a_of_t


def test_cone_rays_golden(M):
    v_pmin, v_pmax, v_mmin, v_mmax = cone_rays(M, 0.5)
    assert np.allclose(v_pmin, [2.0, 1.0])
    assert np.allclose(v_pmax, [1.0, 1.0])
    assert np.allclose(v_mmin, [2.0, -2.0])
    assert np.allclose(v_mmax, [0.0, -1.0])
    # both C+ boundary rays point into the same nappe
    assert v_pmin @ v_pmax > 0


def test_cone_pair_constants(M):
    cp = cone_from_beta(M, 0.5)
    assert cp.disjoint()
    assert cp.mu_expand == pytest.approx(2.0, abs=1e-12)
    assert cp.nu_contract < 1.0
    with pytest.raises(TraceTooSmall):
        cone_from_beta(M, 1.0)


def test_cone_margin_sign():
    c = Cone([1.0, 0.2], [1.0, -0.2])
    assert c.contains([1.0, 0.0]) and c.contains([-1.0, 0.1])
    assert not c.contains([0.0, 1.0])
    assert c.margin(np.array([1.0, 0.2])) == pytest.approx(0.0, abs=1e-12)


def test_min_expansion_matches_brute_force(M):
    c = cone_from_beta(M, 0.5).plus
    J = a_of_t(M, 0.7)
    th = np.linspace(math.atan2(c.r2[1], c.r2[0]), math.atan2(c.r1[1], c.r1[0]), 20001)
    v = np.column_stack([np.cos(th), np.sin(th)])
    brute = np.min(np.linalg.norm(v @ J.T, axis=1))
    assert float(min_expansion(J[None], c)[0]) == pytest.approx(brute, rel=1e-7)


def test_linear_and_twist_certificates(linear, twist16):
    lin = certify(linear, 64)
    assert lin.pass_ and lin.failed_cells == 0
    assert lin.min_expansion == pytest.approx(math.sqrt(6.5), rel=1e-9)
    tw = certify(twist16, 256)
    assert tw.pass_ and tw.min_expansion > 1.0 + 1e-3


def test_slowdown_certificate(twist16):
    g = SlowDownMap(twist16, SlowDownParams(0.25, 0.02, 0.125, 0.125 ** 2 / 4, 1.0))
    base = certify(twist16, 256)
    cert = certify(g, 256, base_certificate=base)
    assert cert.pass_, cert.to_dict()
    assert len(cert.parts) == 4 and cert.parts[0] is base


def test_unstable_direction_linear(M, linear):
    rng = np.random.default_rng(2)
    eu = M.eigenbasis.E[:, 0]
    es = M.eigenbasis.E[:, 1]
    for p in rng.random((5, 2)):
        d = unstable_direction(p, linear)
        assert abs(abs(d.v1 * eu[0] + d.v2 * eu[1]) - 1.0) < 1e-10
        s = stable_direction(p, linear)
        assert abs(abs(s.v1 * es[0] + s.v2 * es[1]) - 1.0) < 1e-10


def test_unstable_direction_invariant(twist16):
    rng = np.random.default_rng(3)
    pts = rng.random((50, 2))
    du, _, _, ok = directions(twist16, pts)
    assert np.all(ok)
    img = twist16.apply(pts)
    dimg, _, _, _ = directions(twist16, img)
    pushed = np.einsum("nij,nj->ni", twist16.derivative(pts), du)
    pushed /= np.linalg.norm(pushed, axis=1)[:, None]
    cr = np.abs(pushed[:, 0] * dimg[:, 1] - pushed[:, 1] * dimg[:, 0])
    assert cr.max() < 1e-9
    assert np.all(default_cones(twist16).plus.contains(du, 1e-12))
    assert np.all(splitting_angle(twist16, pts) > 0.1)


def test_direction_nonconvergence_raises(linear):
    with pytest.raises(NoConvergence):
        unstable_direction([0.1, 0.2], linear, n_iters=1, tol=1e-300)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 0.9))
def test_K_cone_forward_invariant_under_linear(rho):
    M = HyperbolicMatrix(2, 1, 1, 1)
    cp = cone_K(M, rho)
    A = M.array
    for r in (cp.plus.r1, cp.plus.r2):
        assert cp.plus.margin(A @ r) > 0
    Ai = np.linalg.inv(A)
    for r in (cp.minus.r1, cp.minus.r2):
        assert cp.minus.margin(Ai @ r) > 0
