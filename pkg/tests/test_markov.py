import math

import numpy as np
import pytest

import exact_aw
from anosov_flex.errors import Reducible
from anosov_flex.exponents import mme_lower_bound
from anosov_flex.markov import (ALL_ARMS, AdlerWeiss, cells_inside, first_level_inside, markov_consistency,
                                mme_strip_mass, perron_data)
from anosov_flex.torus_core import mu_plus
from anosov_flex.twist_map import StripRegions, default_twist_params

ORACLE_ARMS = [("u", +1), ("u", -1), ("s", +1)]
GOLDEN_SQ = (3 + math.sqrt(5)) / 2


@pytest.fixture(scope="module")
def linear_aw(M):
    return AdlerWeiss(M)


@pytest.fixture(scope="module")
def twist_aw(M):
    return AdlerWeiss(M, default_twist_params(M, 1 / 16, w_frac=0.0))


def test_exact_oracle_counts():
    assert exact_aw.rectangle_count(ORACLE_ARMS) == 2
    assert [exact_aw.face_count(ORACLE_ARMS, n) for n in range(3)] == [5, 34, 233]


def test_builder_matches_oracle(linear_aw):
    assert len(linear_aw.rectangles) == exact_aw.rectangle_count(ORACLE_ARMS)
    for n in range(3):
        assert linear_aw.level(n).n_cells == exact_aw.face_count(ORACLE_ARMS, n)
    assert np.allclose(linear_aw.frozen, exact_aw.arm_lengths(ORACLE_ARMS), atol=1e-9)


def test_linear_level_counts_and_perron(linear_aw):
    counts = [linear_aw.level(n).n_cells for n in range(4)]
    assert counts == [5, 34, 233, 1597]
    for n in range(4):
        part = linear_aw.level(n)
        assert part.perron_root == pytest.approx(GOLDEN_SQ, abs=1e-9)
        assert part.meta["area_sum"] == pytest.approx(1.0, abs=1e-9)
        assert part.meta["mass_sum"] == pytest.approx(1.0, abs=1e-9)
        assert part.meta["distinct_words"] == part.n_cells


def test_linear_parry_is_lebesgue(linear_aw):
    part = linear_aw.level(2)
    assert np.allclose(part.masses, part.areas, atol=1e-9)


def test_cells_shrink_at_rate_lambda(M, linear_aw):
    ds = [linear_aw.level(n).d_s for n in range(4)]
    du = [linear_aw.level(n).d_u for n in range(4)]
    assert all(b < a for a, b in zip(ds, ds[1:]))
    assert all(b < a for a, b in zip(du, du[1:]))
    assert ds[2] / ds[3] == pytest.approx(math.exp(M.Lambda), rel=1e-6)


def test_markov_consistency(linear_aw, twist_aw):
    assert markov_consistency(linear_aw, linear_aw.level(2)) == 1.0
    assert markov_consistency(twist_aw, twist_aw.level(2)) == 1.0


def test_perron_full_shift():
    lam, u, v = perron_data(np.array([[1, 1], [1, 1]]))
    assert lam == pytest.approx(2.0, abs=1e-12)
    assert np.allclose(u * v, [0.5, 0.5])
    with pytest.raises(Reducible):
        perron_data(np.array([[1, 0], [0, 1]]))


def test_four_arm_variant(M):
    aw = AdlerWeiss(M, arm_spec=ALL_ARMS)
    assert len(aw.rectangles) == 3
    assert aw.level(0).n_cells == 7
    assert aw.level(0).perron_root == pytest.approx(GOLDEN_SQ, abs=1e-9)


def test_twist_strip_cell_and_mass(M, twist_aw):
    p = default_twist_params(M, 1 / 16, w_frac=0.0)
    s2 = StripRegions.of(p).S2_w
    n, part = first_level_inside(twist_aw, s2, n_cap=4)
    assert n is not None and n <= 12
    assert cells_inside(part, s2).any()
    Q = mme_strip_mass(part, s2)
    assert Q > 0.0
    lvl = twist_aw.level(n)
    # conjugate to the linear map, so the entropy is unchanged
    assert lvl.perron_root == pytest.approx(GOLDEN_SQ, abs=1e-9)
    # an interval covering every shifted cell carries all the mass
    assert mme_strip_mass(lvl, (0.0, 2.0)) == pytest.approx(1.0, abs=1e-9)
    assert mme_lower_bound(M, p, Q) < math.log(mu_plus(M, p.fast_slope))


def test_json_roundtrip(linear_aw):
    import json
    d = json.loads(linear_aw.level(1).to_json())
    assert len(d["cells"]) == 34 and len(d["words"]) == 34
    assert d["perron_root"] == pytest.approx(GOLDEN_SQ)
