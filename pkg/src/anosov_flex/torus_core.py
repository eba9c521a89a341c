"""Torus arithmetic, the matrix family A(t) and its eigen-data.

Everything here is immutable and cheap; the heavier modules only ever read
these objects.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import NonFinite, ParamDomain, TraceTooSmall


def _phi(d: float, u: float, sign: int) -> float:
    return 2.0 * d - u + sign * math.sqrt(u * u - 4.0)


@dataclass(frozen=True)
class HyperbolicMatrix:
    """Integer matrix [[a, b], [c, d]] with det 1 and trace > 2."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        for name in ("a", "b", "c", "d"):
            v = getattr(self, name)
            if int(v) != v:
                raise ParamDomain(f"entry {name}={v!r} is not an integer")
            object.__setattr__(self, name, int(v))
        if self.a * self.d - self.b * self.c != 1:
            raise ParamDomain(f"det = {self.a * self.d - self.b * self.c}, need a*d - b*c = 1")
        tr = self.a + self.d
        if tr < -2:
            raise ParamDomain(
                f"trace {tr} < -2; pass the negated matrix instead "
                "(f -> L_{-I} o f reduces to trace > 2)"
            )
        if tr <= 2:
            raise ParamDomain(f"trace {tr} is not hyperbolic (need a + d > 2)")
        # b != 0 follows from integrality and trace > 2

    @classmethod
    def from_array(cls, arr) -> "HyperbolicMatrix":
        arr = np.asarray(arr)
        return cls(int(arr[0, 0]), int(arr[0, 1]), int(arr[1, 0]), int(arr[1, 1]))

    @property
    def entries(self) -> tuple[int, int, int, int]:
        return (self.a, self.b, self.c, self.d)

    @property
    def array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=float)

    @property
    def int_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=np.int64)

    @property
    def trace(self) -> int:
        return self.a + self.d

    @property
    def abs_b(self) -> int:
        return abs(self.b)

    @property
    def sgn_b(self) -> int:
        return 1 if self.b > 0 else -1

    @property
    def beta_max(self) -> float:
        """Supremum of admissible shear parameters, (a+d-2)/|b|."""
        return (self.trace - 2) / self.abs_b

    @cached_property
    def Lambda(self) -> float:
        """Topological entropy log mu_plus(1)."""
        tr = self.trace
        return math.log((tr + math.sqrt(tr * tr - 4.0)) / 2.0)

    @cached_property
    def eigenbasis(self) -> "EigenBasis":
        return EigenBasis.of(self)

    def power(self, n: int) -> np.ndarray:
        """Exact integer power A^n (object dtype avoids overflow)."""
        out = np.array([[1, 0], [0, 1]], dtype=object)
        base = np.array([[self.a, self.b], [self.c, self.d]], dtype=object)
        for _ in range(n):
            out = out.dot(base)
        return out


def _trace_at(M: HyperbolicMatrix, t: float) -> float:
    u = M.a + M.d + M.abs_b * (t - 1.0)
    if not u > 2.0:
        raise TraceTooSmall(f"a+d+|b|(t-1) = {u!r} <= 2 at t={t!r}")
    return u


def a_of_t(M: HyperbolicMatrix, t: float) -> np.ndarray:
    """The matrix A(t) = [[a+|b|(t-1), b], [c+sgn(b) d (t-1), d]]."""
    _trace_at(M, t)
    return np.array(
        [[M.a + M.abs_b * (t - 1.0), float(M.b)],
         [M.c + M.sgn_b * M.d * (t - 1.0), float(M.d)]]
    )


def a_of_t_unchecked(M: HyperbolicMatrix, t):
    """Vectorized A(t) without the trace precondition; returns (..., 2, 2)."""
    t = np.asarray(t, dtype=float)
    out = np.empty(t.shape + (2, 2))
    out[..., 0, 0] = M.a + M.abs_b * (t - 1.0)
    out[..., 0, 1] = M.b
    out[..., 1, 0] = M.c + M.sgn_b * M.d * (t - 1.0)
    out[..., 1, 1] = M.d
    return out


@dataclass(frozen=True)
class TangentVector:
    """A tangent vector in the standard basis, optionally with eigen-coordinates."""

    v1: float
    v2: float
    xi: tuple[float, float] | None = None

    @property
    def array(self) -> np.ndarray:
        return np.array([self.v1, self.v2])

    @property
    def norm(self) -> float:
        return math.hypot(self.v1, self.v2)

    def unit(self) -> "TangentVector":
        n = self.norm
        return TangentVector(self.v1 / n, self.v2 / n)

    def with_xi(self, basis: "EigenBasis") -> "TangentVector":
        xi = basis.to_xi(self.array)
        return TangentVector(self.v1, self.v2, (float(xi[0]), float(xi[1])))


@dataclass(frozen=True)
class EigenData:
    mu_plus: float
    mu_minus: float
    e_plus: TangentVector
    e_minus: TangentVector
    Lambda: float


def eigendata(M: HyperbolicMatrix, t: float = 1.0) -> EigenData:
    """Eigenvalues mu_pm(t) and unnormalized eigenvectors (2b, phi_pm) of A(t)."""
    u = _trace_at(M, t)
    root = math.sqrt(u * u - 4.0)
    mu_p = (u + root) / 2.0
    mu_m = (u - root) / 2.0
    e_p = TangentVector(2.0 * M.b, _phi(M.d, u, +1))
    e_m = TangentVector(2.0 * M.b, _phi(M.d, u, -1))
    return EigenData(mu_p, mu_m, e_p, e_m, M.Lambda)


def mu_plus(M: HyperbolicMatrix, t: float) -> float:
    u = _trace_at(M, t)
    return (u + math.sqrt(u * u - 4.0)) / 2.0


def phi_pm(M: HyperbolicMatrix, u: float, sign: int) -> float:
    """phi_pm(u) = 2d - u +/- sqrt(u^2 - 4)."""
    if not u > 2.0:
        raise TraceTooSmall(f"u = {u!r} <= 2")
    return _phi(M.d, u, sign)


@dataclass(frozen=True)
class EigenBasis:
    """Unit eigenvectors of A = A(1) and the norm-equivalence constants.

    ``E`` has columns (v^u, v^s); eigen-coordinates are xi = E^{-1} v and
    ``||v||_{u,s} = |xi|``.  K1, K2 are the square roots of the extreme
    eigenvalues of the Gram matrix E^T E, so K1 |xi| <= |v| <= K2 |xi|.
    """

    E: np.ndarray
    E_inv: np.ndarray
    K1: float
    K2: float
    raw_u: np.ndarray = field(repr=False)
    raw_s: np.ndarray = field(repr=False)

    @classmethod
    def of(cls, M: HyperbolicMatrix) -> "EigenBasis":
        ed = eigendata(M, 1.0)
        vu = ed.e_plus.array
        vs = ed.e_minus.array
        E = np.column_stack([vu / np.linalg.norm(vu), vs / np.linalg.norm(vs)])
        gram = E.T @ E
        ev = np.linalg.eigvalsh(gram)
        return cls(E, np.linalg.inv(E), float(math.sqrt(ev[0])), float(math.sqrt(ev[1])), vu, vs)

    @property
    def u_hat(self) -> np.ndarray:
        return self.E[:, 0]

    @property
    def s_hat(self) -> np.ndarray:
        return self.E[:, 1]

    def to_xi(self, v) -> np.ndarray:
        return np.asarray(v, dtype=float) @ self.E_inv.T

    def from_xi(self, xi) -> np.ndarray:
        return np.asarray(xi, dtype=float) @ self.E.T

    def norm_us(self, v) -> np.ndarray:
        return np.linalg.norm(self.to_xi(v), axis=-1)


@dataclass(frozen=True)
class TorusPoint:
    x: float
    y: float

    def __post_init__(self):
        if not (0.0 <= self.x < 1.0 and 0.0 <= self.y < 1.0):
            raise ParamDomain(f"TorusPoint({self.x}, {self.y}) not reduced; use torus_reduce")

    @property
    def array(self) -> np.ndarray:
        return np.array([self.x, self.y])


def reduce_mod1(arr) -> np.ndarray:
    """Fractional part into [0, 1), guarding the x = -tiny -> 1.0 rounding case."""
    arr = np.asarray(arr, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NonFinite("non-finite coordinate")
    out = arr - np.floor(arr)
    out[out >= 1.0] = 0.0
    return out


def torus_reduce(p) -> TorusPoint:
    x, y = reduce_mod1(np.asarray(p, dtype=float).reshape(2))
    return TorusPoint(float(x), float(y))


def wrap_diff(d) -> np.ndarray:
    """Representative of a displacement in [-1/2, 1/2)."""
    d = np.asarray(d, dtype=float)
    return d - np.floor(d + 0.5)


def torus_distance(p, q) -> float:
    """Minimum Euclidean distance over integer translates."""
    pa = p.array if isinstance(p, TorusPoint) else np.asarray(p, dtype=float)
    qa = q.array if isinstance(q, TorusPoint) else np.asarray(q, dtype=float)
    return float(np.hypot(*wrap_diff(pa - qa)))


def torus_distance_many(p, q) -> np.ndarray:
    d = wrap_diff(np.asarray(p) - np.asarray(q))
    return np.hypot(d[..., 0], d[..., 1])
