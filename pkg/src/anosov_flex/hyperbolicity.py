"""Cone fields, grid certification of hyperbolicity, and invariant directions.

A cone here is a double cone: the positive span of two boundary rays together
with its negative.  Membership and angular margins are measured against the
cone's bisector, so no angle wraparound arises.  Expansion can be measured in
the Euclidean norm or in the eigen-coordinate norm |E^{-1} v|.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import NoConvergence, NotInvertibleAt, ParamDomain
from .torus_core import HyperbolicMatrix, TangentVector, a_of_t, phi_pm
from .twist_map import MapHandle, TwistMap, _as_points

_I2 = np.eye(2)


@dataclass(frozen=True)
class Cone:
    """Double cone spanned by two rays, with the norm |N v| used for expansion."""

    r1: np.ndarray
    r2: np.ndarray
    norm_mat: np.ndarray = field(default_factory=lambda: _I2)
    label: str = ""

    def __post_init__(self):
        r1 = np.asarray(self.r1, float) / np.linalg.norm(self.r1)
        r2 = np.asarray(self.r2, float) / np.linalg.norm(self.r2)
        if abs(r1[0] * r2[1] - r1[1] * r2[0]) < 1e-12:
            raise ParamDomain("cone boundary rays are parallel")
        object.__setattr__(self, "r1", r1)
        object.__setattr__(self, "r2", r2)

    @property
    def bisector(self) -> np.ndarray:
        c = self.r1 + self.r2
        return c / np.linalg.norm(c)

    @property
    def half_aperture(self) -> float:
        return float(math.acos(min(1.0, float(self.r1 @ self.bisector))))

    def margin(self, v) -> np.ndarray:
        """Signed angle (radians) from the boundary; >= 0 means inside."""
        v = np.asarray(v, float)
        c = self.bisector
        dot = np.abs(v[..., 0] * c[0] + v[..., 1] * c[1])
        cr = np.abs(v[..., 0] * c[1] - v[..., 1] * c[0])
        return self.half_aperture - np.arctan2(cr, dot)

    def contains(self, v, tol: float = 0.0) -> np.ndarray:
        return self.margin(v) >= -tol

    def nappe(self, v) -> np.ndarray:
        c = self.bisector
        v = np.asarray(v, float)
        return np.sign(v[..., 0] * c[0] + v[..., 1] * c[1])


@dataclass(frozen=True)
class ConePair:
    """Unstable cone C+ and stable cone C- with their certified constants."""

    plus: Cone
    minus: Cone
    mu_expand: float
    nu_contract: float

    @property
    def v_plus_min(self) -> TangentVector:
        return TangentVector(*self.plus.r1)

    @property
    def v_plus_max(self) -> TangentVector:
        return TangentVector(*self.plus.r2)

    @property
    def v_minus_min(self) -> TangentVector:
        return TangentVector(*self.minus.r1)

    @property
    def v_minus_max(self) -> TangentVector:
        return TangentVector(*self.minus.r2)

    def disjoint(self) -> bool:
        """C+ and C- meet only at 0: no boundary ray of one lies in the other."""
        return bool(np.all(self.plus.margin(np.array([self.minus.r1, self.minus.r2])) < 0)
                    and np.all(self.minus.margin(np.array([self.plus.r1, self.plus.r2])) < 0))


def cone_rays(M: HyperbolicMatrix, beta_tilde: float):
    """The four unnormalized boundary vectors for slope floor 1 - beta_tilde."""
    u = M.trace - M.abs_b * beta_tilde
    v_pmin = np.array([2.0 * M.b, phi_pm(M, u, +1)])
    v_pmax = np.array([float(M.b), float(M.d)])
    v_mmin = np.array([2.0 * M.b, phi_pm(M, u, -1)])
    v_mmax = np.array([0.0, -1.0])
    return v_pmin, v_pmax, v_mmin, v_mmax


def min_expansion(J: np.ndarray, cone: Cone) -> np.ndarray:
    """Exact minimum of |N J v| / |N v| over the cone, for a stack of matrices J.

    In norm coordinates the squared ratio is a Rayleigh quotient of B^T B with
    B = N J N^{-1}; over an arc its minimum sits at an endpoint or at the
    smaller eigenvector when that eigenvector lies in the arc.
    """
    N = cone.norm_mat
    Ni = np.linalg.inv(N)
    B = N @ J @ Ni
    S = np.swapaxes(B, -1, -2) @ B
    x1 = N @ cone.r1
    x2 = N @ cone.r2
    x1 = x1 / np.linalg.norm(x1)
    x2 = x2 / np.linalg.norm(x2)

    def rq(x):
        return np.einsum("i,...ij,j->...", x, S, x)

    ends = np.minimum(rq(x1), rq(x2))
    w, V = np.linalg.eigh(S)
    e = V[..., :, 0]
    # e = a x1 + b x2 with a b >= 0  <=>  e inside the arc (either sign)
    det = x1[0] * x2[1] - x1[1] * x2[0]
    a = (e[..., 0] * x2[1] - e[..., 1] * x2[0]) / det
    b = (x1[0] * e[..., 1] - x1[1] * e[..., 0]) / det
    inside = a * b >= 0
    return np.sqrt(np.where(inside, np.minimum(w[..., 0], ends), ends))


def cone_from_beta(M: HyperbolicMatrix, beta_tilde: float) -> ConePair:
    """Cones C+/C- for maps whose profile slope stays above 1 - beta_tilde."""
    if not M.trace - M.abs_b * beta_tilde > 2.0:
        from .errors import TraceTooSmall
        raise TraceTooSmall(f"a+d-|b|beta~ = {M.trace - M.abs_b * beta_tilde} <= 2")
    v_pmin, v_pmax, v_mmin, v_mmax = cone_rays(M, beta_tilde)
    plus = Cone(v_pmin, v_pmax, label="C+")
    minus = Cone(v_mmin, v_mmax, label="C-")
    A = a_of_t(M, 1.0 - beta_tilde)
    mu = float(min_expansion(A[None], plus)[0])
    nu = 1.0 / float(min_expansion(np.linalg.inv(A)[None], minus)[0])
    return ConePair(plus, minus, mu, nu)


def cone_K(M: HyperbolicMatrix, rho: float = 1.0) -> ConePair:
    """Eigen-coordinate cones |xi2| <= rho |xi1| and |xi1| <= rho |xi2|.

    Expansion for these cones is measured in the eigen-coordinate norm.
    """
    E = M.eigenbasis.E
    Ei = M.eigenbasis.E_inv
    plus = Cone(E @ [1.0, rho], E @ [1.0, -rho], Ei, label=f"K+({rho:.4g})")
    minus = Cone(E @ [rho, 1.0], E @ [-rho, 1.0], Ei, label=f"K-({rho:.4g})")
    lam = math.exp(M.Lambda)
    return ConePair(plus, minus, lam, 1.0 / lam)


# ------------------------------------------------------------ certification


@dataclass
class HyperbolicityCertificate:
    grid_n: int
    cone: str
    min_expansion: float
    min_back_expansion: float
    min_margin: float
    refined_cells: int
    failed_cells: int
    pass_: bool
    require_expansion: bool = True
    expansion_margin: float = 1e-3
    parts: list = field(default_factory=list)
    cells_per_depth: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "parts"}
        d["pass"] = d.pop("pass_")
        for k in ("min_expansion", "min_back_expansion", "min_margin"):
            if not math.isfinite(d[k]):
                d[k] = None
        if self.parts:
            d["parts"] = [p.to_dict() for p in self.parts]
        return d


def _quantities(handle: MapHandle, pts: np.ndarray, cones: ConePair, require_expansion: bool,
                sides: str = "both"):
    """Per-point certification quantities; all must stay positive.

    ``sides`` selects the forward C+ check, the backward C- check, or both;
    an unchecked side reports +inf so it never fails a cell.
    """
    n = pts.shape[0]
    inf = np.full(n, np.inf)
    margins = np.full((n, 4), np.inf)
    same = np.ones(n, dtype=bool)
    ef, eb = inf, inf
    for inverse, cone, cols in ((False, cones.plus, (0, 1)), (True, cones.minus, (2, 3))):
        if sides == ("forward" if inverse else "backward"):
            continue
        _, J, _ = handle.apply_with_derivative(pts, inverse=inverse)
        det = np.linalg.det(J)
        bad = ~(np.abs(det) > 1e-12)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise NotInvertibleAt(pts[i], float(det[i]))
        w1 = J @ cone.r1
        w2 = J @ cone.r2
        margins[:, cols[0]] = cone.margin(w1)
        margins[:, cols[1]] = cone.margin(w2)
        same &= cone.nappe(w1) == cone.nappe(w2)
        e = min_expansion(J, cone)
        if inverse:
            eb = e
        else:
            ef = e
    return margins, ef, eb, same


def _lower(values: np.ndarray) -> np.ndarray:
    """Cell lower bound from the five samples of ``_cell_samples``.

    The Lipschitz constant is estimated from the centre-to-corner differences
    (distance h/sqrt 2) and inflated 2x; every point of the cell lies within
    h/2 of a sample, so the slack is 2 * L_hat * h/2 = sqrt(2) * max|q_c - q_k|.
    """
    lo = values.min(axis=1)
    with np.errstate(invalid="ignore"):
        diff = np.abs(values[:, :4] - values[:, 4:5]).max(axis=1)
    return np.where(np.isinf(lo), lo, lo - math.sqrt(2.0) * diff)


def _cell_samples(x0, y0, h):
    """Corners and centre of cells with lower-left corners (x0, y0), side h."""
    off = np.array([[0, 0], [1, 0], [0, 1], [1, 1], [0.5, 0.5]])
    pts = np.stack([x0, y0], axis=1)[:, None, :] + h[:, None, None] * off[None]
    return pts - np.floor(pts)


def check_cone_invariance(handle: MapHandle, cones: ConePair, grid_n: int = 256, *,
                          region=None, require_expansion: bool = True,
                          expansion_margin: float = 1e-3, angle_margin: float = 1e-6,
                          max_depth: int = 6, sides: str = "both") -> HyperbolicityCertificate:
    """Grid certificate: Df C+ inside C+ and Df^{-1} C- inside C-, with expansion.

    ``region`` optionally restricts the check to cells whose centre satisfies
    a predicate on (n, 2) point arrays; ``sides`` restricts the check to the
    forward (C+) or backward (C-) half.  Cells whose sampled lower bounds fail
    are subdivided up to ``max_depth`` times before being declared failed.
    """
    ii, jj = np.meshgrid(np.arange(grid_n), np.arange(grid_n), indexing="ij")
    x0 = (ii.ravel() / grid_n).astype(float)
    y0 = (jj.ravel() / grid_n).astype(float)
    h = np.full(x0.shape, 1.0 / grid_n)
    if region is not None:
        keep = region(np.stack([x0 + 0.5 * h, y0 + 0.5 * h], axis=1) % 1.0)
        x0, y0, h = x0[keep], y0[keep], h[keep]
    stats = {"exp": np.inf, "bexp": np.inf, "margin": np.inf}
    refined = 0
    failed = 0
    per_depth = []
    for depth in range(max_depth + 1):
        if x0.size == 0:
            break
        per_depth.append(int(x0.size))
        pts = _cell_samples(x0, y0, h)
        ncell = x0.size
        margins, ef, eb, same = _quantities(handle, pts.reshape(-1, 2), cones, require_expansion, sides)
        margins = margins.reshape(ncell, 5, 4)
        ef = ef.reshape(ncell, 5)
        eb = eb.reshape(ncell, 5)
        same = same.reshape(ncell, 5).all(axis=1)
        m_lo = np.min(np.stack([_lower(margins[:, :, k]) for k in range(4)], axis=1), axis=1)
        ef_lo = _lower(ef)
        eb_lo = _lower(eb)
        ok = same & (m_lo > angle_margin)
        if require_expansion:
            ok &= (ef_lo > 1.0 + expansion_margin) & (eb_lo > 1.0 + expansion_margin)
        if np.any(ok):
            stats["exp"] = min(stats["exp"], float(ef_lo[ok].min()))
            stats["bexp"] = min(stats["bexp"], float(eb_lo[ok].min()))
            stats["margin"] = min(stats["margin"], float(m_lo[ok].min()))
        bad = ~ok
        if depth == max_depth:
            failed = int(bad.sum())
            if failed:
                stats["exp"] = min(stats["exp"], float(ef_lo[bad].min()))
                stats["bexp"] = min(stats["bexp"], float(eb_lo[bad].min()))
                stats["margin"] = min(stats["margin"], float(m_lo[bad].min()))
            break
        refined += int(bad.sum())
        xb, yb, hb = x0[bad], y0[bad], 0.5 * h[bad]
        x0 = np.concatenate([xb, xb + hb, xb, xb + hb])
        y0 = np.concatenate([yb, yb, yb + hb, yb + hb])
        h = np.concatenate([hb, hb, hb, hb])
    return HyperbolicityCertificate(
        grid_n=grid_n, cone=cones.plus.label, min_expansion=stats["exp"],
        min_back_expansion=stats["bexp"], min_margin=stats["margin"],
        refined_cells=refined, failed_cells=failed, pass_=failed == 0,
        require_expansion=require_expansion, expansion_margin=expansion_margin,
        cells_per_depth=per_depth,
    )


def default_cones(handle: MapHandle) -> ConePair:
    """C+/C- with the slope floor halfway between 1 - beta and the admissible limit."""
    M = handle.M
    handle = getattr(handle, "base", handle)
    beta = handle.params.beta if isinstance(handle, TwistMap) else 0.0
    beta_tilde = 0.5 * (beta + M.beta_max)
    return cone_from_beta(M, beta_tilde)


def certify(handle: MapHandle, grid_n: int = 256, expansion_margin: float = 1e-3,
            base_certificate: HyperbolicityCertificate | None = None) -> HyperbolicityCertificate:
    """Certificate appropriate to the map family.

    Linear and twist maps: C+/C- on the whole torus with expansion.
    Slow-down maps: (i) the base map's certificate, (ii) invariance of the
    eigen-coordinate cones K+/K- on the whole torus, (iii) invariance of the
    narrow cone K+_rho on D_{r1} and of K-_rho under the inverse on G(D_{r1}),
    with expansion in the eigen norm.  ``base_certificate`` reuses (i) when
    several slow-down maps share a base.
    """
    from .slow_down import SlowDownMap, rho_cone_size

    if not isinstance(handle, SlowDownMap):
        return check_cone_invariance(handle, default_cones(handle), grid_n,
                                     expansion_margin=expansion_margin)
    base = base_certificate if base_certificate is not None else certify(handle.base, grid_n, expansion_margin)
    M = handle.M
    whole = check_cone_invariance(handle, cone_K(M, 1.0), grid_n, require_expansion=False)
    rho = rho_cone_size(handle.params.alpha, handle.params.eps)
    r1 = handle.r1

    def in_disk(p):
        s = handle.chart(p)
        return np.einsum("ij,ij->i", s, s) <= r1 * r1

    def from_disk(p):
        return in_disk(handle.inverse(p))

    # forward on D_{r1}; backward on its image, where G^{-1} lands in the disk
    disk_f = check_cone_invariance(handle, cone_K(M, rho), grid_n, region=in_disk,
                                   expansion_margin=expansion_margin, sides="forward")
    disk_b = check_cone_invariance(handle, cone_K(M, rho), grid_n, region=from_disk,
                                   expansion_margin=expansion_margin, sides="backward")
    parts = [base, whole, disk_f, disk_b]
    return HyperbolicityCertificate(
        grid_n=grid_n, cone="composite", min_expansion=min(base.min_expansion, disk_f.min_expansion),
        min_back_expansion=min(base.min_back_expansion, disk_b.min_back_expansion),
        min_margin=min(p.min_margin for p in parts), refined_cells=sum(p.refined_cells for p in parts),
        failed_cells=sum(p.failed_cells for p in parts), pass_=all(p.pass_ for p in parts),
        expansion_margin=expansion_margin, parts=parts,
    )


# ------------------------------------------------------------ directions


def _seeds(handle: MapHandle, stable: bool) -> np.ndarray:
    cones = default_cones(handle)
    c = cones.minus if stable else cones.plus
    return np.ascontiguousarray(np.concatenate([c.r1, c.r2]))


def directions(handle: MapHandle, pts, n_iters: int = 60, tol: float = 1e-12, stable: bool = False):
    """E^u (or E^s) at many points by pushing two cone seeds along the orbit.

    Returns (unit directions, one-step log-expansion along them, seed spread,
    converged flags).  The seed spread is |sin| of the angle between the two
    pushed seeds, an upper bound on the remaining direction error.
    """
    pts = _as_points(pts)
    return K.directions_many(pts, int(n_iters), float(tol), _seeds(handle, stable), stable, *handle.kargs)


def unstable_direction(p, handle: MapHandle, n_iters: int = 60, tol: float = 1e-12) -> TangentVector:
    d, _, spread, ok = directions(handle, p, n_iters, tol, stable=False)
    if not ok[0]:
        raise NoConvergence(f"E^u not converged after {n_iters} iterates", float(spread[0]))
    return TangentVector(float(d[0, 0]), float(d[0, 1]))


def stable_direction(p, handle: MapHandle, n_iters: int = 60, tol: float = 1e-12) -> TangentVector:
    d, _, spread, ok = directions(handle, p, n_iters, tol, stable=True)
    if not ok[0]:
        raise NoConvergence(f"E^s not converged after {n_iters} iterates", float(spread[0]))
    return TangentVector(float(d[0, 0]), float(d[0, 1]))


def splitting_angle(handle: MapHandle, pts, n_iters: int = 60) -> np.ndarray:
    """Angle between E^u and E^s at each point."""
    du, _, _, _ = directions(handle, pts, n_iters, stable=False)
    ds, _, _, _ = directions(handle, pts, n_iters, stable=True)
    cr = np.abs(du[:, 0] * ds[:, 1] - du[:, 1] * ds[:, 0])
    return np.arcsin(np.clip(cr, 0.0, 1.0))
