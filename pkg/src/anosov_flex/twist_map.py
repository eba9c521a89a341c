"""Strip-twist deformations of a linear Anosov automorphism.

A twist map keeps the linear action off a vertical strip and, inside the
strip, replaces the identity in the first coordinate by a circle map f with
slopes 1 - beta (slow part) and s2 = (beta l + delta (1 - beta)) / delta (fast
part).  The map and all its relatives are evaluated by the compiled kernel in
``_kernels``; this module owns parameter validation and the Python-facing
handles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels as K
from .errors import NonFinite, ParamDomain
from .torus_core import HyperbolicMatrix, TorusPoint, a_of_t, torus_reduce

GL_NODES = 64


def _gauss_legendre():
    x, w = np.polynomial.legendre.leggauss(GL_NODES)
    return np.ascontiguousarray(x), np.ascontiguousarray(w)


def _bump_tables():
    """GL nodes on [-1, 1] with weights pre-divided by the bump's mass."""
    x, w = _gauss_legendre()
    mass = float(np.sum(w * np.exp(-1.0 / (1.0 - x * x))))
    return x, w / mass


GLX, GLW = _bump_tables()
GLX_RAW, GLW_RAW = _gauss_legendre()
_EMPTY_TAB = np.zeros((2, 3))


@dataclass(frozen=True)
class TwistParams:
    """Geometry (m, l, delta, beta, w) of the strip deformation.

    ``delta == l`` is admitted: the profile is then the identity, which is the
    natural start of a delta-ladder.
    """

    m: float
    l: float
    delta: float
    beta: float
    w: float = 0.0

    def __post_init__(self):
        for name in ("m", "l", "delta", "beta", "w"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise NonFinite(f"{name}={v!r}")
            object.__setattr__(self, name, float(v))
        m, l, delta, beta, w = self.m, self.l, self.delta, self.beta, self.w
        if not 0.0 < m < 1.0:
            raise ParamDomain(f"need 0 < m < 1, got m={m}")
        if not 0.0 < l < 1.0 - m:
            raise ParamDomain(f"need 0 < l < 1 - m, got l={l}, m={m}")
        if not 0.0 < delta <= l:
            raise ParamDomain(f"need 0 < delta <= l, got delta={delta}, l={l}")
        if not 0.0 < beta < 1.0:
            raise ParamDomain(f"need 0 < beta < 1, got beta={beta}")
        if not 0.0 <= w < delta / 4.0:
            raise ParamDomain(f"need 0 <= w < delta/4, got w={w}, delta={delta}")
        if not (m - w > 0.0 and m + l + w < 1.0):
            raise ParamDomain("mollified strip [m-w, m+l+w] must sit inside (0, 1)")

    def check_against(self, M: HyperbolicMatrix) -> None:
        if not M.trace - M.abs_b * self.beta > 2.0:
            raise ParamDomain(
                f"beta={self.beta} violates a+d-|b|beta > 2 "
                f"(need beta < (a+d-2)/|b| = {M.beta_max:.6g})"
            )

    @property
    def fast_slope(self) -> float:
        return (self.beta * self.l + self.delta * (1.0 - self.beta)) / self.delta

    @property
    def breakpoints(self) -> tuple[float, float, float]:
        return (self.m, self.m + self.l - self.delta, self.m + self.l)

    @property
    def slope_jumps(self) -> tuple[float, float, float]:
        return (-self.beta, self.beta * self.l / self.delta, 1.0 - self.fast_slope)

    def with_(self, **kw) -> "TwistParams":
        d = dict(m=self.m, l=self.l, delta=self.delta, beta=self.beta, w=self.w)
        d.update(kw)
        return TwistParams(**d)


@dataclass(frozen=True)
class StripRegions:
    """x-intervals of the regions cut out by the twist profile.

    S1 is the slow part, S2 the fast part, S3 the complement where the map is
    linear; ``S2_w`` is the fast part shrunk by w on both sides, where the
    mollified derivative equals the fast slope exactly.
    """

    S1: tuple[float, float]
    S2: tuple[float, float]
    S3: tuple[tuple[float, float], tuple[float, float]]
    S2_w: tuple[float, float]
    support: tuple[float, float]

    @classmethod
    def of(cls, p: TwistParams) -> "StripRegions":
        m, l, d, w = p.m, p.l, p.delta, p.w
        return cls(
            S1=(m, m + l - d),
            S2=(m + l - d, m + l),
            S3=((0.0, m), (m + l, 1.0)),
            S2_w=(m + l - d + w, m + l - w),
            support=(m - w, m + l + w),
        )

    @staticmethod
    def _inside(x, iv):
        x = np.asarray(x)
        return (x > iv[0]) & (x < iv[1])

    def in_S2(self, x):
        return self._inside(x, self.S2)

    def in_S2_w(self, x):
        return self._inside(x, self.S2_w)


def _prm_linear(M: HyperbolicMatrix) -> np.ndarray:
    prm = np.zeros(K.NPRM)
    prm[K.P_A], prm[K.P_B], prm[K.P_C], prm[K.P_D] = M.entries
    E = M.eigenbasis.E
    Ei = M.eigenbasis.E_inv
    prm[K.P_E00], prm[K.P_E01], prm[K.P_E10], prm[K.P_E11] = E.ravel()
    prm[K.P_EI00], prm[K.P_EI01], prm[K.P_EI10], prm[K.P_EI11] = Ei.ravel()
    prm[K.P_LAM] = M.Lambda
    prm[K.P_RTOL] = 1e-10
    prm[K.P_ATOL] = 1e-12
    prm[K.P_MAXSTEP] = 200000
    return prm


def _fill_twist(prm: np.ndarray, p: TwistParams) -> None:
    prm[K.P_TW_ON] = 1.0
    prm[K.P_M], prm[K.P_L], prm[K.P_DELTA] = p.m, p.l, p.delta
    prm[K.P_BETA], prm[K.P_W] = p.beta, p.w
    prm[K.P_BP0:K.P_BP0 + 3] = p.breakpoints
    prm[K.P_DS0:K.P_DS0 + 3] = p.slope_jumps


def _as_points(pts) -> np.ndarray:
    if isinstance(pts, TorusPoint):
        pts = pts.array
    arr = np.asarray(pts, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NonFinite("non-finite coordinate")
    return np.ascontiguousarray(arr.reshape(-1, 2))


class MapHandle:
    """A torus diffeomorphism evaluated by the compiled kernel.

    Subclasses fill ``prm`` and the profile tables; everything else is shared.
    Batch methods accept (n, 2) arrays and return arrays; ``*_point`` methods
    take and return single points.
    """

    name = "map"
    M: HyperbolicMatrix
    prm: np.ndarray
    psitab: np.ndarray = _EMPTY_TAB
    itab: np.ndarray = _EMPTY_TAB

    @property
    def kargs(self):
        return (self.prm, self.psitab, self.itab, GLX, GLW)

    @property
    def Lambda(self) -> float:
        return self.M.Lambda

    def apply(self, pts) -> np.ndarray:
        out, _, _ = K.map_many(_as_points(pts), False, *self.kargs)
        return out

    def inverse(self, pts) -> np.ndarray:
        out, _, _ = K.map_many(_as_points(pts), True, *self.kargs)
        return out

    def derivative(self, pts) -> np.ndarray:
        _, jac, _ = K.map_many(_as_points(pts), False, *self.kargs)
        return jac

    def inverse_derivative(self, pts) -> np.ndarray:
        _, jac, _ = K.map_many(_as_points(pts), True, *self.kargs)
        return jac

    def apply_with_derivative(self, pts, inverse: bool = False):
        out, jac, status = K.map_many(_as_points(pts), inverse, *self.kargs)
        return out, jac, status

    def apply_point(self, p) -> TorusPoint:
        return torus_reduce(self.apply(p)[0])

    def inverse_point(self, p) -> TorusPoint:
        return torus_reduce(self.inverse(p)[0])

    def iterate(self, pts, n: int, inverse: bool = False) -> np.ndarray:
        out = _as_points(pts)
        for _ in range(n):
            out, _, _ = K.map_many(out, inverse, *self.kargs)
        return out

    def describe(self) -> dict:
        return {"kind": self.name, "matrix": list(self.M.entries)}


class LinearMap(MapHandle):
    """The automorphism L_A."""

    name = "linear"

    def __init__(self, M: HyperbolicMatrix):
        self.M = M
        self.prm = _prm_linear(M)

    @property
    def is_linear(self) -> bool:
        return True


class TwistMap(MapHandle):
    """F^w_{l,delta}: linear off the strip, twisted by f^w inside it."""

    name = "twist"

    def __init__(self, M: HyperbolicMatrix, params: TwistParams):
        params.check_against(M)
        self.M = M
        self.params = params
        self.prm = _prm_linear(M)
        _fill_twist(self.prm, params)

    @cached_property
    def regions(self) -> StripRegions:
        return StripRegions.of(self.params)

    @property
    def is_linear(self) -> bool:
        return False

    def describe(self) -> dict:
        p = self.params
        return {**super().describe(), "m": p.m, "l": p.l, "delta": p.delta, "beta": p.beta, "w": p.w}


# ------------------------------------------------------------ the profile


def f_piecewise(x, p: TwistParams):
    """The continuous three-branch profile (w = 0), evaluated on [0, 1)."""
    x = np.asarray(x, dtype=float)
    m, l, d, beta = p.m, p.l, p.delta, p.beta
    out = np.array(x, copy=True)
    s1 = (x > m) & (x <= m + l - d)
    s2 = (x > m + l - d) & (x <= m + l)
    out[s1] = (1.0 - beta) * x[s1] + beta * m
    out[s2] = p.fast_slope * x[s2] - beta * (m + l) * (l - d) / d
    return out if out.ndim else float(out)


def _profile_prm(p: TwistParams) -> np.ndarray:
    prm = np.zeros(K.NPRM)
    _fill_twist(prm, p)
    return prm


def _profile(x, p: TwistParams):
    x = np.asarray(x, dtype=float)
    f, df = K.twist_profile_many(np.ascontiguousarray(x.reshape(-1)), _profile_prm(p), GLX, GLW)
    return f.reshape(x.shape), df.reshape(x.shape)


def f_mollified(x, p: TwistParams):
    """Lift of f^w on [0, 1): the profile convolved with the shipped bump."""
    f, _ = _profile(x, p)
    return f if f.ndim else float(f)


def f_mollified_deriv(x, p: TwistParams):
    _, df = _profile(x, p)
    return df if df.ndim else float(df)


def derivative_table_rows(p: TwistParams):
    """The six (interval, lower, upper) derivative bounds of the mollified profile."""
    m, l, d, w, b = p.m, p.l, p.delta, p.w, p.beta
    s2 = p.fast_slope
    return [
        ((m - w, m + w), 1.0 - b, 1.0),
        ((m + w, m + l - d - w), 1.0 - b, 1.0 - b),
        ((m + l - d - w, m + l - d + w), 1.0 - b, s2),
        ((m + l - d + w, m + l - w), s2, s2),
        ((m + l - w, m + l + w), 1.0, s2),
    ]


# ------------------------------------------------------------ functional API


def twist_apply(pt, p: TwistParams, M: HyperbolicMatrix):
    return TwistMap(M, p).apply_point(pt)


def twist_derivative(pt, p: TwistParams, M: HyperbolicMatrix) -> np.ndarray:
    x = _as_points(pt)[0, 0]
    return a_of_t(M, f_mollified_deriv(x, p))


def twist_inverse(pt, p: TwistParams, M: HyperbolicMatrix):
    return TwistMap(M, p).inverse_point(pt)


def default_twist_params(M: HyperbolicMatrix, delta_frac: float = 1.0, *, m: float = 0.375,
                         l: float = 0.25, beta: float | None = None, w_frac: float = 0.125) -> TwistParams:
    """Shipped geometry: strip [3/8, 5/8], w = delta/8, beta capped at 0.9 beta_max."""
    if beta is None:
        beta = min(0.5, 0.9 * M.beta_max)
    delta = l * delta_frac
    return TwistParams(m=m, l=l, delta=delta, beta=beta, w=w_frac * delta)
