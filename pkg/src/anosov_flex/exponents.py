"""Lyapunov exponents, periodic-orbit MME estimates and the pressure curve.

Two exponents matter: lambda_abs (the unstable exponent of the absolutely
continuous invariant measure) and lambda_mme (that of the measure of maximal
entropy).  lambda_abs is a Birkhoff average of log|Df| along the tracked
unstable direction from Lebesgue-random starts, or a grid quadrature of the
same integrand against the invariant density.  lambda_mme is the average
periodic-point expansion, because period-n points equidistribute to the MME.

Determinism: every orbit has its own stream spawned from one SeedSequence,
per-orbit results land in fixed slots and are reduced in index order, so the
output does not depend on the thread count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

from . import _kernels as K
from .errors import ContinuationLoss, IncompleteSet, NoConvergence, TooManyPoints
from .hyperbolicity import default_cones, directions
from .torus_core import HyperbolicMatrix, mu_plus, phi_pm, torus_distance_many
from .twist_map import LinearMap, MapHandle, TwistMap, TwistParams, _as_points

METHODS = ("birkhoff", "quadrature", "periodic", "pressure_derivative")


@dataclass(frozen=True)
class ExponentEstimate:
    value: float
    std_error: float
    n_samples: int
    n_iters: int
    method: str

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not math.isfinite(self.value):
            raise NoConvergence(f"{self.method} estimate is not finite", float("nan"))
        if not self.std_error >= 0.0:
            raise ValueError("std_error must be >= 0")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


# ------------------------------------------------------------ Birkhoff / quadrature


def orbit_starts(n_orbits: int, seed: int) -> np.ndarray:
    """One uniform start per orbit, each from its own spawned stream."""
    children = np.random.SeedSequence(seed).spawn(n_orbits)
    return np.array([np.random.default_rng(c).random(2) for c in children])


def lyap_abs_birkhoff(handle: MapHandle, n_orbits: int = 200, n_iters: int = 100_000,
                      burn_in: int = 1000, rng_seed: int = 0, *, inverse: bool = False,
                      sigma_cap: float | None = 1.0) -> ExponentEstimate:
    """Mean over random orbits of the time-averaged log-expansion along E^u.

    ``inverse=True`` runs the same estimator on the inverse map, whose value
    is minus the stable exponent.  A between-orbit spread above
    ``sigma_cap`` raises NoConvergence: it points at a sampling bug rather
    than at slow mixing.
    """
    starts = orbit_starts(n_orbits, rng_seed)
    cones = default_cones(handle)
    v0 = np.ascontiguousarray(cones.minus.bisector if inverse else cones.plus.bisector)
    means, status = K.birkhoff_orbits(starts, v0, int(n_iters), int(burn_in), inverse, *handle.kargs)
    if np.any(status != 0):
        raise NoConvergence(f"{int(np.sum(status != 0))} orbits hit an integration failure", float("nan"))
    sd = float(np.std(means, ddof=1)) if n_orbits > 1 else 0.0
    if sigma_cap is not None and sd > sigma_cap:
        raise NoConvergence(f"between-orbit sigma {sd:.3g} exceeds cap {sigma_cap}", sd)
    return ExponentEstimate(float(np.mean(means)), sd / math.sqrt(n_orbits), n_orbits, n_iters, "birkhoff")


def lyap_stable_birkhoff(handle: MapHandle, **kw) -> ExponentEstimate:
    """The stable exponent, as minus the unstable exponent of the inverse."""
    est = lyap_abs_birkhoff(handle, inverse=True, **kw)
    return ExponentEstimate(-est.value, est.std_error, est.n_samples, est.n_iters, est.method)


def lyap_quadrature(handle: MapHandle, density: Callable | None = None, grid_n: int = 512,
                    n_iters: int = 60) -> ExponentEstimate:
    """Midpoint-grid integral of log|Df|_{E^u}| against the normalized density.

    ``density`` maps (n, 2) points to kappa; by default a slow-down map uses
    its own density and everything else the constant 1.  The reported error
    is the largest seed spread of the direction solve times the worst
    one-step log-derivative, an upper bound on the integrand error.
    """
    g = (np.arange(grid_n) + 0.5) / grid_n
    X, Y = np.meshgrid(g, g, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    if density is None:
        density = getattr(handle, "density", None)
    kappa = np.ones(len(pts)) if density is None else np.asarray(density(pts), float)
    _, logexp, spread, ok = directions(handle, pts, n_iters, tol=1e-9)
    if not np.all(ok):
        raise NoConvergence(f"E^u unresolved at {int(np.sum(~ok))} grid points", float(spread.max()))
    w = kappa / kappa.sum()
    value = float(np.sum(w * logexp))
    err = float(spread.max()) * float(np.abs(logexp).max() + 1.0)
    return ExponentEstimate(value, err, len(pts), n_iters, "quadrature")


# ------------------------------------------------------------ periodic points


@dataclass
class PeriodicOrbitSet:
    """All period-n points of one map with their log-expansions along E^u."""

    period: int
    points: np.ndarray
    expansions: np.ndarray
    count_expected: int
    exact: list | None = field(default=None, repr=False)

    def __post_init__(self):
        self.points = np.asarray(self.points, float).reshape(-1, 2)
        self.expansions = np.asarray(self.expansions, float)

    @property
    def complete(self) -> bool:
        return len(self.points) == self.count_expected

    def require_complete(self) -> None:
        if not self.complete:
            raise IncompleteSet(f"period {self.period}: {len(self.points)} points, expected {self.count_expected}")


def lefschetz_count(M: HyperbolicMatrix, n: int) -> int:
    """|trace(A^n) - 2|, in exact integer arithmetic."""
    a, _, _, d = _int_power(M, n)
    return abs(a + d - 2)


def _int_power(M: HyperbolicMatrix, n: int):
    a, b, c, d = 1, 0, 0, 1
    for _ in range(n):
        a, b, c, d = a * M.a + b * M.c, a * M.b + b * M.d, c * M.a + d * M.c, c * M.b + d * M.d
    return a, b, c, d


def _egcd(p: int, q: int):
    if q == 0:
        return (abs(p), 1 if p >= 0 else -1, 0)
    g, u, v = _egcd(q, p % q)
    return g, v, u - (p // q) * v


def enumerate_fixed_points_linear(M: HyperbolicMatrix, n: int, cap: int = 1_000_000) -> PeriodicOrbitSet:
    """Every x in [0,1)^2 with (A^n - I) x in Z^2, in exact rational arithmetic.

    The solutions are B^{-1} k mod Z^2 for B = A^n - I, one per coset of
    B Z^2 in Z^2.  The column lattice B Z^2 has a triangular basis
    {(g, *), (0, |det B| / g)} with g the gcd of its first row, so the cosets
    are represented by 0 <= k1 < g, 0 <= k2 < |det B| / g.
    """
    if n < 1:
        raise ValueError("period must be >= 1")
    a, b, c, d = _int_power(M, n)
    p, r, q, s = a - 1, b, c, d - 1  # B = [[p, r], [q, s]]
    det = p * s - r * q
    count = abs(det)
    if count > cap:
        raise TooManyPoints(f"{count} period-{n} points exceed cap {cap}")
    g, _, _ = _egcd(p, r)
    h = count // g
    exact = []
    for k1 in range(g):
        for k2 in range(h):
            x = Fraction(s * k1 - r * k2, det)
            y = Fraction(-q * k1 + p * k2, det)
            exact.append((x - math.floor(x), y - math.floor(y)))
    exact = sorted(set(exact))
    if len(exact) != count:
        raise IncompleteSet(f"lattice enumeration found {len(exact)} of {count} points")
    pts = np.array([[float(x), float(y)] for x, y in exact])
    lam = n * M.Lambda
    return PeriodicOrbitSet(n, pts, np.full(count, lam), count, exact)


def _leading_log_eig(J: np.ndarray) -> np.ndarray:
    """log of the spectral radius of each 2x2 matrix (E^u expansion at a periodic point)."""
    tr = J[:, 0, 0] + J[:, 1, 1]
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    disc = np.sqrt(np.maximum(tr * tr - 4 * det, 0.0))
    return np.log(0.5 * (np.abs(tr) + disc))


def refine_periodic(handle: MapHandle, guess: np.ndarray, n: int, tol: float = 1e-10,
                    max_iter: int = 60):
    pts, res, ok, jac = K.newton_many(np.ascontiguousarray(guess, dtype=float), int(n), tol,
                                      int(max_iter), *handle.kargs)
    return pts, res, ok, jac


def _min_pair_distance(pts: np.ndarray) -> float:
    if len(pts) < 2:
        return math.inf
    from scipy.spatial import cKDTree

    # periodic images: replicate the unit square's border neighbourhood
    shifts = np.array([[i, j] for i in (-1, 0, 1) for j in (-1, 0, 1)])
    tiled = (pts[None, :, :] + shifts[:, None, :]).reshape(-1, 2)
    tree = cKDTree(tiled)
    dist, idx = tree.query(pts, k=2)
    return float(dist[:, 1].min())


def _advance(path, pts, t0: float, t1: float, n: int, tol: float, depth: int, max_depth: int,
             max_move: float):
    """Move points from path(t0) to path(t1), bisecting the step for any that fail.

    A solve fails if Newton does not converge or if the point jumps further
    than ``max_move``, which would risk landing on a neighbouring orbit.
    """
    pts_new, res, ok, jac = refine_periodic(path(t1), pts, n, tol)
    ok &= torus_distance_many(pts, pts_new) < max_move
    if np.all(ok):
        return pts_new, jac
    if depth >= max_depth:
        i = int(np.argmin(ok))
        raise ContinuationLoss(tuple(pts[i]), t1, f"Newton residual {res[i]:.3g} after {depth} bisections")
    bad = ~ok
    mid = 0.5 * (t0 + t1)
    p_mid, _ = _advance(path, pts[bad], t0, mid, n, tol, depth + 1, max_depth, max_move)
    p_end, j_end = _advance(path, p_mid, mid, t1, n, tol, depth + 1, max_depth, max_move)
    pts_new[bad] = p_end
    jac[bad] = j_end
    return pts_new, jac


def continue_periodic_points(path: Callable[[float], MapHandle], n: int, steps: int = 20,
                             start: PeriodicOrbitSet | None = None, *, tol: float = 1e-10,
                             min_separation: float = 1e-6, max_bisections: int = 12) -> PeriodicOrbitSet:
    """Follow every period-n point from path(0) to path(1) by Newton continuation.

    ``path`` maps a parameter in [0, 1] to a map handle; when ``start`` is
    omitted, path(0) must be linear and the exact lattice set seeds the run.
    Points whose Newton solve fails are retried with the step bisected, up to
    ``max_bisections`` times.
    """
    if start is None:
        start = enumerate_fixed_points_linear(path(0.0).M, n)
    pts = start.points.copy()
    sep = _min_pair_distance(pts)
    if steps == 0:
        pts, jac = _advance(path, pts, 0.0, 1.0, n, tol, max_bisections, max_bisections, 0.3 * sep)
    for k in range(1, steps + 1):
        pts, jac = _advance(path, pts, (k - 1) / steps, k / steps, n, tol, 0, max_bisections, 0.3 * sep)
        sep = _min_pair_distance(pts - np.floor(pts))
        if sep < min_separation:
            raise ContinuationLoss(None, k, f"two continued points collided (distance {sep:.3g})")
    pts = pts - np.floor(pts)
    return PeriodicOrbitSet(n, pts, _leading_log_eig(jac), start.count_expected)


def _base_periodic_set(base: MapHandle, n: int, steps: int) -> PeriodicOrbitSet:
    M = base.M
    if not isinstance(base, TwistMap):
        return enumerate_fixed_points_linear(M, n)
    lin = LinearMap(M)
    p = base.params

    def twist_path(t):
        return lin if t == 0.0 else TwistMap(M, p.with_(beta=t * p.beta))

    return continue_periodic_points(twist_path, n, steps)


def periodic_sets_along_eta(base: MapHandle, params_seq, n: int, steps: int = 20,
                            start: PeriodicOrbitSet | None = None) -> list[PeriodicOrbitSet]:
    """Period-n sets of G_{s,eta} for a decreasing sequence of slow-down params.

    The run starts at eta = 2 r0^2, where G equals its base, and walks eta
    down geometrically; ``steps`` Newton steps are spent per factor 4 in eta.
    Each requested eta gets its own set, so a whole ladder costs one walk.
    """
    from .slow_down import SlowDownMap

    params_seq = list(params_seq)
    etas = [sp.eta for sp in params_seq]
    if any(e2 > e1 for e1, e2 in zip(etas, etas[1:])):
        raise ValueError("eta sequence must be nonincreasing")
    orbits = start if start is not None else _base_periodic_set(base, n, steps)
    out = []
    eta_prev = 2.0 * params_seq[0].r0sq if params_seq else 0.0
    for sp in params_seq:
        hi = max(eta_prev, sp.eta)
        if sp.eta >= 2.0 * sp.r0sq:
            # flat profile: G is the base map
            out.append(continue_periodic_points(lambda t, sp=sp: SlowDownMap(base, sp), n, 0, orbits))
            orbits = out[-1]
            eta_prev = 2.0 * sp.r0sq
            continue
        span = math.log(hi / sp.eta)
        k = max(1, int(math.ceil(steps * span / math.log(4.0))))

        def path(t, sp=sp, hi=hi, span=span):
            return SlowDownMap(base, sp.with_(eta=hi * math.exp(-t * span)))

        orbits = continue_periodic_points(path, n, k, orbits)
        out.append(orbits)
        eta_prev = sp.eta
    return out


def periodic_set(handle: MapHandle, n: int, steps: int = 20) -> PeriodicOrbitSet:
    """Period-n points of a linear, twist or slow-down map via a canonical path.

    Twist maps are reached by growing beta from 0; slow-down maps first build
    their base, then shrink eta geometrically from the flat value 2 r0^2.
    """
    from .slow_down import SlowDownMap

    if getattr(handle, "is_linear", False):
        return enumerate_fixed_points_linear(handle.M, n)
    if isinstance(handle, SlowDownMap):
        return periodic_sets_along_eta(handle.base, [handle.params], n, steps)[0]
    return _base_periodic_set(handle, n, steps)


def lyap_mme_periodic(orbits: PeriodicOrbitSet, next_orbits: PeriodicOrbitSet | None = None) -> ExponentEstimate:
    """Mean periodic-point expansion per iterate.

    With a second set at period n+1 the later value is reported and the
    spread between the two periods serves as the error.
    """
    orbits.require_complete()
    e_n = float(np.mean(orbits.expansions)) / orbits.period
    if next_orbits is None:
        return ExponentEstimate(e_n, 0.0, len(orbits.points), orbits.period, "periodic")
    next_orbits.require_complete()
    e_n1 = float(np.mean(next_orbits.expansions)) / next_orbits.period
    return ExponentEstimate(e_n1, abs(e_n1 - e_n), len(next_orbits.points), next_orbits.period, "periodic")


# ------------------------------------------------------------ pressure


@dataclass
class PressureCurve:
    t_grid: np.ndarray
    P_values: np.ndarray
    period: int
    dP_values: np.ndarray | None = None

    def second_differences(self) -> np.ndarray:
        return np.diff(self.P_values, 2)

    def to_dict(self) -> dict:
        return {"t": self.t_grid.tolist(), "P": self.P_values.tolist(), "period": self.period,
                "dP": None if self.dP_values is None else self.dP_values.tolist()}


def pressure(orbits: PeriodicOrbitSet, t) -> np.ndarray | float:
    """P_n(t) = (1/n) log sum_p |D_p f^n|_{E^u}|^{-t}."""
    orbits.require_complete()
    t_arr = np.atleast_1d(np.asarray(t, float))
    chi = orbits.expansions
    out = logsumexp(-t_arr[:, None] * chi[None, :], axis=1) / orbits.period
    return float(out[0]) if np.ndim(t) == 0 else out


def pressure_slope(orbits: PeriodicOrbitSet, t) -> np.ndarray | float:
    """dP_n/dt, exactly: minus the chi-average under the weights e^{-t chi}."""
    t_arr = np.atleast_1d(np.asarray(t, float))
    chi = orbits.expansions
    lw = -t_arr[:, None] * chi[None, :]
    w = np.exp(lw - lw.max(axis=1, keepdims=True))
    out = -(w * chi).sum(axis=1) / w.sum(axis=1) / orbits.period
    return float(out[0]) if np.ndim(t) == 0 else out


def pressure_curve(orbits: PeriodicOrbitSet, t_grid: Sequence[float] = tuple(np.linspace(-0.5, 1.5, 21))) -> PressureCurve:
    t = np.asarray(t_grid, float)
    return PressureCurve(t, np.asarray(pressure(orbits, t)), orbits.period, np.asarray(pressure_slope(orbits, t)))


def exponent_from_pressure(orbits: PeriodicOrbitSet, t: float, h: float = 1e-3) -> ExponentEstimate:
    """-dP/dt at t by central differences; t=0 gives lambda_mme, t=1 lambda_abs."""
    d = -(pressure(orbits, t + h) - pressure(orbits, t - h)) / (2 * h)
    exact = -pressure_slope(orbits, t)
    return ExponentEstimate(float(d), abs(float(d) - float(exact)), len(orbits.points), orbits.period,
                            "pressure_derivative")


# ------------------------------------------------------------ bounds


def _eigen_coeffs(M: HyperbolicMatrix, v) -> tuple[float, float]:
    """Coefficients of v in the unnormalized eigenbasis (2b, phi_+), (2b, phi_-)."""
    eb = M.eigenbasis
    B = np.column_stack([eb.raw_u, eb.raw_s])
    c = np.linalg.solve(B, np.asarray(v, float))
    return float(c[0]), float(c[1])


def _v_plus_min(M: HyperbolicMatrix, beta: float) -> np.ndarray:
    return np.array([2.0 * M.b, phi_pm(M, M.trace - M.abs_b * beta, +1)])


def _v_plus_max(M: HyperbolicMatrix) -> np.ndarray:
    return np.array([float(M.b), float(M.d)])


def expansion_constant_abs(M: HyperbolicMatrix, beta: float) -> float:
    """C bounding the one-step expansion of C+ vectors under A from below.

    A vector v = c_u v^u + c_s v^s of the cone grows at least by
    |c_u| |v^u| sin(angle(v^u, v^s)) / |v|; the minimum over the two
    boundary rays bounds the whole cone.
    """
    eb = M.eigenbasis
    vu, vs = eb.raw_u, eb.raw_s
    sin = abs(vu[0] * vs[1] - vu[1] * vs[0]) / (np.linalg.norm(vu) * np.linalg.norm(vs))
    vals = []
    for v in (_v_plus_max(M), _v_plus_min(M, beta)):
        cu, _ = _eigen_coeffs(M, v)
        vals.append(abs(cu) * np.linalg.norm(vu) * sin / np.linalg.norm(v))
    return float(min(vals))


def expansion_constant_mme(M: HyperbolicMatrix, beta: float) -> float:
    """|b| min{1 / (2 |v+_max|), 1 / |v+_min(-beta)|}."""
    return float(M.abs_b * min(1.0 / (2.0 * np.linalg.norm(_v_plus_max(M))),
                               1.0 / np.linalg.norm(_v_plus_min(M, beta))))


def abs_floor(M: HyperbolicMatrix, p: TwistParams) -> float:
    """(l + 2w) min{log C, 0} + Lambda (1 - l - 2w)."""
    width = p.l + 2.0 * p.w
    C = expansion_constant_abs(M, p.beta)
    return width * min(math.log(C), 0.0) + M.Lambda * (1.0 - width)


def mme_lower_bound(M: HyperbolicMatrix, p: TwistParams, Q: float) -> float:
    """Q log mu+(s2) + (1 - Q) log C_mme for the fast slope s2."""
    C = expansion_constant_mme(M, p.beta)
    return Q * math.log(mu_plus(M, p.fast_slope)) + (1.0 - Q) * math.log(C)
