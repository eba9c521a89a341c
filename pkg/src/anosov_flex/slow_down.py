"""Slow-down deformation of a map near its fixed point (0, 0).

In eigen-coordinates s = (s1, s2) centred at the origin the linear map is the
time-one map of ds1/dt = Lambda s1, ds2/dt = -Lambda s2.  Multiplying the
vector field by psi_eta(s1^2 + s2^2) slows orbits near the fixed point while
keeping the density 1/psi_eta invariant.  The deformed map G replaces the base
map by the time-one map of the slowed flow on a disk D_{r1}.

Disk radius: the disk on which the flow replaces the base map has radius
r1 = e^Lambda r0 so that A(D_{r1}) contains D_{r0} and every orbit segment
starting on the boundary of D_{r1} avoids the slowed zone; the gluing is then
exactly continuous.  The residence check keeps the annulus
D_{2 Lambda r0} minus D_{r0 / (2 Lambda)}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize

from . import _kernels as K
from .errors import IntegrationFailure, NonFinite, ParamDomain, RegionOverlap
from .torus_core import HyperbolicMatrix
from .twist_map import GLW_RAW, GLX_RAW, LinearMap, MapHandle, TwistMap, _as_points

PSI_TABLE_N = 4096
I_TABLE_N = 2048
RISE_WIDTH = 0.125  # in units of r0^2


# ------------------------------------------------------------ parameters


def slope_cap(alpha: float, eps: float) -> float:
    """c = (1 - eps)^(-2(1 + alpha)), the allowed excess slope of psi_0."""
    return (1.0 - eps) ** (-2.0 * (1.0 + alpha))


@dataclass(frozen=True)
class SlowDownParams:
    alpha: float
    eps: float
    r0: float
    eta: float
    s: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "eps", "r0", "eta", "s"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise NonFinite(f"{name}={v!r}")
            object.__setattr__(self, name, float(v))
        if not 0.0 < self.alpha < 1.0 / 3.0:
            raise ParamDomain(f"need 0 < alpha < 1/3, got {self.alpha}")
        if not 0.0 < self.eps < 1.0:
            raise ParamDomain(f"need 0 < eps < 1, got {self.eps}")
        if not (1.0 + self.alpha) * slope_cap(self.alpha, self.eps) < 4.0 / 3.0:
            raise ParamDomain(
                f"(1+alpha)/(1-eps)^(2(1+alpha)) = "
                f"{(1 + self.alpha) * slope_cap(self.alpha, self.eps):.6g} must be < 4/3"
            )
        if not 0.0 < self.r0 < 1.0:
            raise ParamDomain(f"need 0 < r0 < 1, got {self.r0}")
        if not 0.0 < self.eta <= 2.0 * self.r0 ** 2 * (1.0 + 1e-12):
            raise ParamDomain(f"need 0 < eta <= 2 r0^2 = {2 * self.r0 ** 2:.6g}, got {self.eta}")
        if not 0.0 <= self.s <= 1.0:
            raise ParamDomain(f"need 0 <= s <= 1, got {self.s}")

    @property
    def r0sq(self) -> float:
        return self.r0 * self.r0

    def r1(self, Lambda: float) -> float:
        return math.exp(Lambda) * self.r0

    def with_(self, **kw) -> "SlowDownParams":
        d = dict(alpha=self.alpha, eps=self.eps, r0=self.r0, eta=self.eta, s=self.s)
        d.update(kw)
        return SlowDownParams(**d)


def eta_ladder(r0: float) -> list[float]:
    r2 = r0 * r0
    return [2 * r2, r2, r2 / 4, r2 / 16, r2 / 64]


# ------------------------------------------------------------ smooth steps


def _smoothstep(t):
    t = np.asarray(t, dtype=float)
    s = np.zeros_like(t)
    ds = np.zeros_like(t)
    inner = (t > 0) & (t < 1)
    ti = t[inner]
    a = np.exp(-1.0 / ti)
    b = np.exp(-1.0 / (1.0 - ti))
    si = a / (a + b)
    s[inner] = si
    ds[inner] = si * (1.0 - si) * (1.0 / ti ** 2 + 1.0 / (1.0 - ti) ** 2)
    s[t >= 1] = 1.0
    return s, ds


def _smoothstep_dd(t):
    """Second derivative of the exp-smoothstep by differentiating S(1-S)g."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inner = (t > 0) & (t < 1)
    ti = t[inner]
    s, ds = _smoothstep(ti)
    g = 1.0 / ti ** 2 + 1.0 / (1.0 - ti) ** 2
    dg = -2.0 / ti ** 3 + 2.0 / (1.0 - ti) ** 3
    out[inner] = ds * (1.0 - 2.0 * s) * g + s * (1.0 - s) * dg
    return out


@lru_cache(maxsize=4)
def _integral_table() -> np.ndarray:
    """Rows (I, S, S') of I(tau) = int_0^tau S on a uniform grid of [0, 1]."""
    t = np.linspace(0.0, 1.0, I_TABLE_N + 1)
    s, ds = _smoothstep(t)
    gx, gw = np.polynomial.legendre.leggauss(16)
    h = t[1] - t[0]
    cell = np.zeros(I_TABLE_N)
    for k in range(16):
        tk = t[:-1] + 0.5 * h * (gx[k] + 1.0)
        cell += 0.5 * h * gw[k] * _smoothstep(tk)[0]
    I = np.concatenate([[0.0], np.cumsum(cell)])
    return np.ascontiguousarray(np.column_stack([I, s, ds]))


# ------------------------------------------------------------ psi_0


@dataclass(frozen=True)
class _Psi0Shape:
    r0sq: float
    alpha: float
    cm: float
    ra: float
    rb: float
    x0: float
    u1: float

    def p(self, u):
        return (np.asarray(u) / self.r0sq) ** (1.0 + self.alpha)

    def dp(self, u):
        return (1.0 + self.alpha) / self.r0sq * (np.asarray(u) / self.r0sq) ** self.alpha

    def ddp(self, u):
        a = self.alpha
        return (1.0 + a) * a / self.r0sq ** 2 * (np.asarray(u) / self.r0sq) ** (a - 1.0)

    def mult(self, u):
        u = np.asarray(u, dtype=float)
        rise, drise = _smoothstep((u - self.ra) / (self.rb - self.ra))
        drop, ddrop = _smoothstep((u - self.x0) / (self.u1 - self.x0))
        m = 1.0 + (self.cm - 1.0) * rise - self.cm * drop
        dm = (self.cm - 1.0) * drise / (self.rb - self.ra) - self.cm * ddrop / (self.u1 - self.x0)
        return m, dm

    def dpsi(self, u):
        return self.dp(u) * self.mult(u)[0]

    def ddpsi(self, u):
        m, dm = self.mult(u)
        return self.ddp(u) * m + self.dp(u) * dm


def _shape_for(r0sq: float, alpha: float, eps: float, u1: float, drop: float) -> _Psi0Shape:
    c = slope_cap(alpha, eps)
    ra = 0.25 * r0sq
    return _Psi0Shape(r0sq, alpha, 1.0 + 0.9 * (c - 1.0), ra, ra + RISE_WIDTH * r0sq, u1 - drop, u1)


def _reach(shape: _Psi0Shape) -> float:
    ulo = shape.ra
    val, _ = integrate.quad(shape.dpsi, ulo, shape.u1, points=[shape.rb, shape.x0],
                            epsabs=1e-14, epsrel=1e-13, limit=400)
    return float(shape.p(ulo)) + val - 1.0


@lru_cache(maxsize=64)
def _psi0_tables(alpha: float, eps: float, r0: float):
    """Solve for the flat point u1 and tabulate (psi_0, psi_0', psi_0'') on [r0^2/4, u1]."""
    r0sq = r0 * r0
    c = slope_cap(alpha, eps)
    drop = min(0.03, 0.5 * 0.9 * (c - 1.0)) * r0sq
    lo = 0.25 * r0sq + RISE_WIDTH * r0sq + drop
    f = lambda u1: _reach(_shape_for(r0sq, alpha, eps, u1, drop))
    if f(r0sq) < 0.0:
        raise ParamDomain(f"no admissible psi_0 blend for alpha={alpha}, eps={eps}; increase eps")
    u1 = optimize.brentq(f, lo, r0sq, xtol=1e-15 * r0sq, rtol=1e-15)
    shape = _shape_for(r0sq, alpha, eps, u1, drop)
    ulo = shape.ra
    u = np.linspace(ulo, u1, PSI_TABLE_N + 1)
    h = u[1] - u[0]
    gx, gw = np.polynomial.legendre.leggauss(16)
    cell = np.zeros(PSI_TABLE_N)
    for k in range(16):
        cell += 0.5 * h * gw[k] * shape.dpsi(u[:-1] + 0.5 * h * (gx[k] + 1.0))
    vals = float(shape.p(ulo)) + np.concatenate([[0.0], np.cumsum(cell)])
    # absorb the last few ulps of quadrature drift so the table ends at exactly 1
    vals += (1.0 - vals[-1]) * (u - ulo) / (u1 - ulo)
    tab = np.column_stack([vals, shape.dpsi(u), shape.ddpsi(u)])
    tab[-1] = (1.0, 0.0, 0.0)
    return np.ascontiguousarray(tab), shape


def rho_cone_size(alpha: float, eps: float) -> float:
    """Aperture of the narrow unstable cone |xi2| <= rho |xi1| inside the disk.

    The closed form of the larger tangency root is negative; its magnitude is
    the cone size that the invariance argument needs.
    """
    if not (0.0 < alpha < 1.0 / 3.0 and 0.0 < eps < 1.0):
        raise ParamDomain(f"alpha={alpha}, eps={eps} out of range")
    if not (1.0 + alpha) * slope_cap(alpha, eps) < 4.0 / 3.0:
        raise ParamDomain("(1+alpha)/(1-eps)^(2(1+alpha)) must be < 4/3")
    cp = (1.0 - eps) ** (2.0 * (1.0 + alpha))
    k = cp + 1.0 + alpha
    zeta = (-k + math.sqrt(k * k - (1.0 + alpha) ** 2)) / (1.0 + alpha)
    return abs(zeta)


def residence_bound(Lambda: float, alpha: float) -> float:
    """T0: the annulus-residence bound depending only on Lambda and alpha."""
    return max(2.0 ** (3 + 2 * alpha) * Lambda ** (1 + 2 * alpha) * (16 * Lambda ** 4 - 1),
               2.0 ** (12 + 2 * alpha) * Lambda ** (9 + 2 * alpha))


# ------------------------------------------------------------ psi_eta


class PsiProfile:
    """psi_0 and psi_eta for one (alpha, eps, r0, eta) and Lambda."""

    def __init__(self, params: SlowDownParams, Lambda: float):
        self.params = params
        self.Lambda = float(Lambda)
        self.psitab, self.shape = _psi0_tables(params.alpha, params.eps, params.r0)
        self.itab = _integral_table()
        self.u1 = self.shape.u1
        self.u_flat = self._u_flat()

    @property
    def flat(self) -> bool:
        return self.u_flat == 0.0

    def _u_flat(self) -> float:
        eta = self.params.eta
        if eta >= 2.0 * self.params.r0sq or 0.5 * eta >= self.u1:
            return 0.0
        if 0.75 * eta <= self.u1:
            return self.u1
        target = self.u1 / eta
        itab = self.itab

        def h(x):
            tau = 2.0 * (x - 0.25)
            i = np.interp(tau, np.linspace(0, 1, itab.shape[0]), itab[:, 0])
            return 0.5 + 0.5 * i - target

        return eta * optimize.brentq(h, 0.25, 0.75, xtol=1e-15)

    def fill(self, prm: np.ndarray) -> None:
        p = self.params
        sh = self.shape
        prm[K.P_SD_ON] = 1.0
        prm[K.P_LAM] = self.Lambda
        prm[K.P_R0] = p.r0
        prm[K.P_R1] = p.r1(self.Lambda)
        prm[K.P_ETA] = p.eta
        prm[K.P_ALPHA] = p.alpha
        prm[K.P_ULO] = sh.ra
        prm[K.P_U1] = sh.u1
        prm[K.P_R0SQ] = p.r0sq
        prm[K.P_UFLAT] = self.u_flat
        prm[K.P_CM] = sh.cm
        prm[K.P_RA] = sh.ra
        prm[K.P_RB] = sh.rb
        prm[K.P_X0] = sh.x0

    def _prm(self) -> np.ndarray:
        prm = np.zeros(K.NPRM)
        self.fill(prm)
        return prm

    def psi0(self, u):
        u = np.ascontiguousarray(np.atleast_1d(np.asarray(u, dtype=float)))
        return K.psi0_many(u, self._prm(), self.psitab)

    def psi(self, u):
        u = np.ascontiguousarray(np.atleast_1d(np.asarray(u, dtype=float)))
        return K.psi_eta_many(u, self._prm(), self.psitab, self.itab)

    def verify(self, n: int = 4096) -> dict:
        """Sampled check of the profile properties; returns per-property pass flags."""
        p = self.params
        r2 = p.r0sq
        a = p.alpha
        c = slope_cap(a, p.eps)
        u = np.linspace(0.0, 1.0, n + 1)[1:]
        v, dv = self.psi(u)
        v0, dv0 = self.psi0(u)
        inside = u < r2
        bound = c * (1 + a) / r2 * (u / r2) ** a
        tol = 1e-9
        out = {
            "positive_nondecreasing": bool(np.all(v[inside] > 0) and np.all(dv[inside] >= -tol)),
            "flat_outside": bool(np.allclose(v[~inside], 1.0, atol=1e-12, rtol=0)),
            "constant_core": bool(np.allclose(v[u <= p.eta / 4], self.psi0(p.eta / 2)[0][0], atol=1e-12, rtol=0)
                                  if self.u_flat else True),
            "matches_psi0_above_eta": bool(np.allclose(v[u >= p.eta], v0[u >= p.eta], atol=1e-12, rtol=0)),
            "derivative_bound": bool(np.all(dv[inside] <= bound[inside] * (1 + 1e-9))
                                     and np.all(dv <= 4.0 / (3.0 * r2))),
            "log_derivative_bound": bool(np.all(dv[inside] * u[inside] <= c * (1 + a) * v[inside] * (1 + 1e-9))),
            "dominates_power_law": bool(np.all(v0 >= np.minimum((u / r2) ** (1 + a), 1.0) - 1e-12)),
            "psi0_slope_bound": bool(np.all(dv0[inside] <= bound[inside] * (1 + 1e-9))),
        }
        out["all"] = all(out.values())
        return out


# ------------------------------------------------------------ the map G


def _check_disk(M: HyperbolicMatrix, r1: float, base: MapHandle) -> None:
    E = M.eigenbasis.E
    # the disk is an ellipse E(D_r1) in the lifted square; its half-extents
    ext = r1 * np.linalg.norm(E, axis=1)
    if np.any(ext >= 0.5):
        raise RegionOverlap(f"D_r1 (r1={r1:.4g}) overlaps its own translates (half-extents {ext})")
    if isinstance(base, TwistMap):
        lo, hi = base.regions.support
        if ext[0] >= lo or 1.0 - ext[0] <= hi:
            raise RegionOverlap(
                f"D_r1 x-extent {ext[0]:.4g} meets the twist strip [{lo:.4g}, {hi:.4g}]"
            )


class SlowDownMap(MapHandle):
    """G_{s,eta}: the base map off D_{r1}, the slowed time-one map on it."""

    name = "slowdown"

    def __init__(self, base: MapHandle, params: SlowDownParams):
        self.base = base
        self.M = base.M
        self.params = params
        self.profile = PsiProfile(params, base.M.Lambda)
        self.r1 = params.r1(base.M.Lambda)
        _check_disk(self.M, self.r1, base)
        self.prm = base.prm.copy()
        self.profile.fill(self.prm)
        self.psitab = self.profile.psitab
        self.itab = self.profile.itab

    @property
    def is_linear(self) -> bool:
        return False

    def describe(self) -> dict:
        p = self.params
        return {**self.base.describe(), "kind": self.name, "alpha": p.alpha, "eps": p.eps,
                "r0": p.r0, "eta": p.eta, "s": p.s}

    def chart(self, pts) -> np.ndarray:
        pts = _as_points(pts)
        lifted = pts - np.floor(pts + 0.5)
        return lifted @ self.M.eigenbasis.E_inv.T

    def from_chart(self, s) -> np.ndarray:
        x = np.asarray(s, dtype=float).reshape(-1, 2) @ self.M.eigenbasis.E.T
        return x - np.floor(x)

    def flow(self, s, sign: int = 1, check: bool = True):
        """Time-one (sign=+1) or time-minus-one flow map and variational matrices."""
        s = np.ascontiguousarray(np.asarray(s, dtype=float).reshape(-1, 2))
        out, A, steps, status = K.flow_many(s, float(sign), self.prm, self.psitab, self.itab)
        if check and np.any(status != K.ST_OK):
            i = int(np.argmax(status != K.ST_OK))
            raise IntegrationFailure(f"step control failed from s={tuple(s[i])}")
        return out, A, steps

    def density(self, pts) -> np.ndarray:
        s = self.chart(pts)
        u = np.einsum("ij,ij->i", s, s)
        v, _ = self.profile.psi(u)
        return np.where(u <= self.params.r0sq, 1.0 / v, 1.0)

    def normalizer(self) -> float:
        return normalizer(self.profile, abs(np.linalg.det(self.M.eigenbasis.E)))

    def residence_times(self, s) -> np.ndarray:
        lam = self.M.Lambda
        r0 = self.params.r0
        s = np.ascontiguousarray(np.asarray(s, dtype=float).reshape(-1, 2))
        return K.annulus_residence(s, self.prm, self.psitab, self.itab,
                                   r0 / (2 * lam), 2 * lam * r0, GLX_RAW, GLW_RAW, 32)


def normalizer(profile: PsiProfile, det_E: float = 1.0) -> float:
    """K_eta = 1 + |det E| pi int_0^{r0^2} (1/psi_eta - 1) du."""
    if profile.flat:
        return 1.0
    r2 = profile.params.r0sq
    f = lambda u: 1.0 / profile.psi(u)[0][0] - 1.0
    eta = profile.params.eta
    pts = sorted({x for x in (eta / 4, 3 * eta / 4, profile.shape.rb, profile.shape.x0, profile.u1) if 0 < x < r2})
    val, _ = integrate.quad(f, 0.0, r2, points=pts, epsabs=1e-13, epsrel=1e-10, limit=500)
    return 1.0 + det_E * math.pi * val


def residence_time_check(smap: SlowDownMap, n_samples: int = 10_000, seed: int = 0) -> dict:
    """Sample starts uniformly in D_{2 Lambda r0}; longest annulus stay against T0."""
    rng = np.random.default_rng(seed)
    lam = smap.M.Lambda
    r = 2 * lam * smap.params.r0 * np.sqrt(rng.random(n_samples))
    th = 2 * np.pi * rng.random(n_samples)
    s = np.column_stack([r * np.cos(th), r * np.sin(th)])
    t = smap.residence_times(s)
    T0 = residence_bound(lam, smap.params.alpha)
    return {"max_time": float(t.max()), "T0": T0, "n": n_samples, "pass": bool(t.max() < T0)}


def linear_transit_time(Lambda: float, r0: float) -> float:
    """Longest single stay of the undeformed flow in the residence annulus.

    The annulus radii have ratio q = 4 Lambda^2.  The longest stay belongs to
    the hyperbola s1 s2 = const that grazes the inner circle; it spends
    log(q^2 + sqrt(q^4 - 1)) / Lambda between its two outer crossings.
    """
    q2 = (4.0 * Lambda * Lambda) ** 2
    return math.log(q2 + math.sqrt(q2 * q2 - 1.0)) / Lambda


def make_slowdown(M: HyperbolicMatrix, params: SlowDownParams, base: MapHandle | None = None) -> SlowDownMap:
    return SlowDownMap(base if base is not None else LinearMap(M), params)


# ------------------------------------------------------------ functional forms


def psi0(u, alpha: float, eps: float, r0: float, Lambda: float = 1.0):
    """(psi_0(u), psi_0'(u)) for scalar or array u."""
    prof = PsiProfile(SlowDownParams(alpha, eps, r0, 2.0 * r0 * r0), Lambda)
    return prof.psi0(u)


def psi_eta(u, params: SlowDownParams, Lambda: float = 1.0):
    """(psi_eta(u), psi_eta'(u)) for scalar or array u."""
    return PsiProfile(params, Lambda).psi(u)


def flow_time_one(q, params: SlowDownParams, M: HyperbolicMatrix, sign: int = 1):
    """The time-one map of the slowed flow in eigen-coordinates, with its variational matrix."""
    out, A, _ = SlowDownMap(LinearMap(M), params).flow(q, sign)
    return out, A


def g_apply(pt, params: SlowDownParams, base: MapHandle) -> np.ndarray:
    return SlowDownMap(base, params).apply(pt)


def g_derivative(pt, params: SlowDownParams, base: MapHandle) -> np.ndarray:
    return SlowDownMap(base, params).derivative(pt)


def density(pt, params: SlowDownParams, M: HyperbolicMatrix) -> np.ndarray:
    """Unnormalized invariant density kappa_eta: 1/psi_eta on D_{r0}, 1 elsewhere."""
    return SlowDownMap(LinearMap(M), params).density(pt)
