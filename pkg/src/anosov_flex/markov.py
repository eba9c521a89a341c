"""Markov partitions for the piecewise-linear twist map (w = 0).

The construction follows Adler and Weiss.  Arms of the stable and unstable
manifolds of the fixed point (0, 0) (by default both unstable arms and one
stable arm) grow at equal arclength speed; an arm stops the moment it runs
into an arm of the other flavour.  The
frozen arms cut the torus into rectangles.  Finer partitions are the faces
of F^{-n}(stable arms) together with F^{n+1}(unstable arms); every such face
is a cylinder set, so it carries a symbolic word over the base rectangles
and a Parry mass.

Leaves are exact polylines: F is affine on each piece of the profile, so a
segment is split wherever its x-coordinate (or, for F^{-1}, the x-coordinate
of its preimage) crosses a profile breakpoint and the pieces are mapped
vertex by vertex.  Faces are found with shapely: the leaves are cut to the
unit square, noded, polygonized, and faces touching opposite sides of the
square are glued with a union-find.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import shapely
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from shapely.geometry import LineString, MultiLineString, Point, Polygon
from shapely.ops import polygonize, unary_union

from .errors import BudgetExceeded, DegenerateCell, PartitionNotClosed, Reducible
from .torus_core import HyperbolicMatrix, mu_plus
from .twist_map import StripRegions, TwistParams, f_piecewise

# how far a frozen arm is pushed past its hit point so noding sees a crossing
OVERSHOOT = 1e-9
SLIVER = 1e-20


# ------------------------------------------------------------ the PL map


class PiecewiseLinearTwist:
    """The lifted map F_{l,delta} (w = 0) on R^2, or L_A when params is None."""

    def __init__(self, M: HyperbolicMatrix, params: TwistParams | None = None):
        self.M = M
        if params is not None:
            if params.w != 0.0:
                params = params.with_(w=0.0)
            params.check_against(M)
        self.params = params
        self.bps = () if params is None or params.beta == 0.0 else params.breakpoints

    def g(self, x):
        """f(x) - x for the lifted profile; periodic in x."""
        x = np.asarray(x, float)
        if self.params is None or self.params.beta == 0.0:
            return np.zeros_like(x)
        xf = x - np.floor(x)
        return f_piecewise(xf, self.params) - xf

    def forward(self, V: np.ndarray) -> np.ndarray:
        a, b, c, d = self.M.entries
        x, y = V[:, 0], V[:, 1]
        g = self.g(x)
        return np.column_stack([a * x + b * y + abs(b) * g, c * x + d * y + np.sign(b) * d * g])

    def inverse(self, V: np.ndarray) -> np.ndarray:
        a, b, c, d = self.M.entries
        X, Y = V[:, 0], V[:, 1]
        x = d * X - b * Y
        return np.column_stack([x, -c * X + a * Y - np.sign(b) * self.g(x)])

    def _split(self, V: np.ndarray, coord) -> np.ndarray:
        """Insert the points where coord(V) crosses k + breakpoint."""
        if not self.bps or len(V) < 2:
            return V
        q = coord(V)
        out = [V[:1]]
        for i in range(len(V) - 1):
            q0, q1 = q[i], q[i + 1]
            lo, hi = min(q0, q1), max(q0, q1)
            ts = []
            for bp in self.bps:
                k0 = math.ceil(lo - bp)
                k1 = math.floor(hi - bp)
                for k in range(k0, k1 + 1):
                    t = (k + bp - q0) / (q1 - q0)
                    if 0.0 < t < 1.0:
                        ts.append(t)
            if ts:
                ts = np.sort(np.asarray(ts))
                out.append(V[i] + ts[:, None] * (V[i + 1] - V[i]))
            out.append(V[i + 1:i + 2])
        return np.concatenate(out)

    def push(self, V: np.ndarray, inverse: bool = False) -> np.ndarray:
        """Exact image of the polyline V under F (or F^{-1})."""
        if inverse:
            a, b, c, d = self.M.entries
            return self.inverse(self._split(V, lambda W: d * W[:, 0] - b * W[:, 1]))
        return self.forward(self._split(V, lambda W: W[:, 0]))

    def torus_forward(self, p: np.ndarray) -> np.ndarray:
        q = self.forward(p)
        return q - np.floor(q)

    def torus_inverse(self, p: np.ndarray) -> np.ndarray:
        q = self.inverse(p)
        return q - np.floor(q)


# ------------------------------------------------------------ leaves


@dataclass
class ManifoldPolyline:
    """A lifted arm of W^u((0,0)) or W^s((0,0)), starting at the origin."""

    vertices: np.ndarray
    flavor: str
    sign: int = 1

    @property
    def seg_lengths(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self.vertices, axis=0), axis=1)

    @property
    def length(self) -> float:
        return float(self.seg_lengths.sum())

    def truncate(self, s: float) -> "ManifoldPolyline":
        return ManifoldPolyline(_truncate(self.vertices, s), self.flavor, self.sign)

    def directions(self) -> np.ndarray:
        d = np.diff(self.vertices, axis=0)
        return d / np.linalg.norm(d, axis=1, keepdims=True)


def _truncate(V: np.ndarray, s: float) -> np.ndarray:
    seg = np.linalg.norm(np.diff(V, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    if s >= cum[-1]:
        return V
    i = int(np.searchsorted(cum, s, side="right")) - 1
    t = (s - cum[i]) / seg[i] if seg[i] > 0 else 0.0
    return np.concatenate([V[:i + 1], (V[i] + t * (V[i + 1] - V[i]))[None]])


def _drop_short(V: np.ndarray, tol: float = 1e-15) -> np.ndarray:
    keep = np.concatenate([[True], np.linalg.norm(np.diff(V, axis=0), axis=1) > tol])
    return V[keep]


def trace_manifold(pl: PiecewiseLinearTwist, flavor: str, arc_budget: float, sign: int = 1,
                   seed_length: float = 0.05, max_vertices: int = 2_000_000) -> ManifoldPolyline:
    """Arm of W^u (forward images) or W^s (backward images) of length arc_budget.

    The seed is a short eigen-direction segment at the origin; it avoids the
    strip, where the map is linear, so each image contains the previous one
    and truncating after every push is exact.
    """
    eb = pl.M.eigenbasis
    direction = eb.u_hat if flavor == "unstable" else eb.s_hat
    if flavor not in ("unstable", "stable"):
        raise ValueError(f"flavor must be 'unstable' or 'stable', got {flavor!r}")
    V = np.array([[0.0, 0.0], sign * seed_length * direction])
    inverse = flavor == "stable"
    while True:
        length = float(np.linalg.norm(np.diff(V, axis=0), axis=1).sum())
        if length >= arc_budget:
            break
        V = _drop_short(_truncate(pl.push(V, inverse), arc_budget))
        if len(V) > max_vertices:
            raise BudgetExceeded(f"{len(V)} vertices before reaching arclength {arc_budget}")
    return ManifoldPolyline(_truncate(V, arc_budget), flavor, sign)


def push_leaf(pl: PiecewiseLinearTwist, leaf: ManifoldPolyline, n: int) -> ManifoldPolyline:
    """F^n of an unstable arm or F^{-n} of a stable arm."""
    V = leaf.vertices
    for _ in range(n):
        V = _drop_short(pl.push(V, inverse=leaf.flavor == "stable"))
    return ManifoldPolyline(V, leaf.flavor, leaf.sign)


# ------------------------------------------------------------ torus geometry


def _snap(p: np.ndarray, tol: float = 1e-11) -> np.ndarray:
    """Put coordinates that sit on a square side (up to rounding) exactly on it."""
    r = np.round(p)
    return np.where((np.abs(p - r) < tol) & ((r == 0.0) | (r == 1.0)), r, p)


def torus_segments(V: np.ndarray):
    """Cut a lifted polyline at integer lines; returns (segments in [0,1]^2, start arclengths)."""
    P = V[:-1]
    Q = V[1:]
    seg_len = np.linalg.norm(Q - P, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])[:-1]
    segs = []
    starts = []
    for i in range(len(P)):
        p, q = P[i], Q[i]
        ts = [0.0, 1.0]
        for ax in (0, 1):
            lo, hi = min(p[ax], q[ax]), max(p[ax], q[ax])
            for k in range(math.floor(lo) + 1, math.ceil(hi)):
                ts.append((k - p[ax]) / (q[ax] - p[ax]))
        ts = np.unique(np.clip(ts, 0.0, 1.0))
        for t0, t1 in zip(ts[:-1], ts[1:]):
            if t1 - t0 <= 0.0:
                continue
            a = p + t0 * (q - p)
            b = p + t1 * (q - p)
            shift = np.floor(0.5 * (a + b))
            segs.append((_snap(a - shift), _snap(b - shift)))
            starts.append(cum[i] + t0 * seg_len[i])
    return np.asarray(segs).reshape(-1, 2, 2), np.asarray(starts)


def _intersections(segA, sA, segB, sB):
    """All proper crossings between two torus segment sets, as arclength pairs."""
    tree = shapely.STRtree(shapely.linestrings(segB))
    ia, ib = tree.query(shapely.linestrings(segA), predicate="intersects")
    if len(ia) == 0:
        return np.empty((0, 2))
    p, r = segA[ia, 0], segA[ia, 1] - segA[ia, 0]
    q, s = segB[ib, 0], segB[ib, 1] - segB[ib, 0]
    den = r[:, 0] * s[:, 1] - r[:, 1] * s[:, 0]
    ok = np.abs(den) > 1e-300
    qp = q - p
    t = np.where(ok, (qp[:, 0] * s[:, 1] - qp[:, 1] * s[:, 0]) / np.where(ok, den, 1.0), np.nan)
    u = np.where(ok, (qp[:, 0] * r[:, 1] - qp[:, 1] * r[:, 0]) / np.where(ok, den, 1.0), np.nan)
    good = ok & (t >= -1e-12) & (t <= 1 + 1e-12) & (u >= -1e-12) & (u <= 1 + 1e-12)
    la = np.linalg.norm(r, axis=1)
    lb = np.linalg.norm(s, axis=1)
    return np.column_stack([sA[ia] + t * la, sB[ib] + u * lb])[good]


CLASSICAL_ARMS = (("unstable", +1), ("unstable", -1), ("stable", +1))
ALL_ARMS = (("unstable", +1), ("unstable", -1), ("stable", +1), ("stable", -1))


def freeze_arms(pl: PiecewiseLinearTwist, start_budget: float = 2.0, max_budget: float = 64.0,
                arm_spec=CLASSICAL_ARMS):
    """Grow the arms at equal speed; each stops on first contact with the other flavour.

    ``arm_spec`` lists (flavor, sign) pairs.  The default (both unstable arms,
    one stable arm) closes up two rectangles; four arms always give at least
    three faces, since every arm ends in a T-junction.
    Returns the frozen arms (overshoot applied) and their frozen lengths.
    """
    budget = start_budget
    while budget <= max_budget:
        arms = [trace_manifold(pl, fl, budget, sg) for fl, sg in arm_spec]
        tor = [torus_segments(a.vertices) for a in arms]
        events = []
        ius = [i for i, a in enumerate(arms) if a.flavor == "unstable"]
        iss = [i for i, a in enumerate(arms) if a.flavor == "stable"]
        for iu in ius:
            for is_ in iss:
                hits = _intersections(tor[iu][0], tor[iu][1], tor[is_][0], tor[is_][1])
                hits = hits[(hits[:, 0] > 1e-9) | (hits[:, 1] > 1e-9)]
                for tu, ts in hits:
                    events.append((max(tu, ts), iu, tu, is_, ts))
        events.sort()
        frozen = [math.inf] * len(arms)
        for _, iu, tu, is_, ts in events:
            if abs(tu - ts) <= 1e-12:
                if frozen[iu] == math.inf and frozen[is_] == math.inf:
                    frozen[iu], frozen[is_] = tu, ts
                continue
            if tu > ts:
                if frozen[iu] == math.inf and frozen[is_] >= ts:
                    frozen[iu] = tu
            elif frozen[is_] == math.inf and frozen[iu] >= tu:
                frozen[is_] = ts
        if all(f < budget - 2 * OVERSHOOT for f in frozen):
            return [a.truncate(f + OVERSHOOT) for a, f in zip(arms, frozen)], frozen
        budget *= 2.0
    raise BudgetExceeded(f"arms still growing at arclength {max_budget}")


# ------------------------------------------------------------ faces on the torus


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i, j):
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            self.parent[max(ri, rj)] = min(ri, rj)


def _side_intervals(poly: Polygon, side: int, value: float):
    """Intervals of the boundary of poly lying on the line coord[side] = value."""
    out = []
    coords = np.asarray(poly.exterior.coords)
    other = 1 - side
    for a, b in zip(coords[:-1], coords[1:]):
        if abs(a[side] - value) < 1e-12 and abs(b[side] - value) < 1e-12:
            lo, hi = sorted((a[other], b[other]))
            if hi - lo > 1e-12:
                out.append((lo, hi))
    return out


def _overlaps(left, right):
    """Pairs (i, j) whose intervals on the two copies of a seam overlap."""
    left = sorted(left)
    right = sorted(right)
    pairs = []
    j0 = 0
    for lo, hi, i in left:
        while j0 < len(right) and right[j0][1] <= lo + 1e-12:
            j0 += 1
        j = j0
        while j < len(right) and right[j][0] < hi - 1e-12:
            if min(hi, right[j][1]) - max(lo, right[j][0]) > 1e-12:
                pairs.append((i, right[j][2]))
            j += 1
    return pairs


def torus_faces(leaves: list[np.ndarray]):
    """Faces cut out of the torus by lifted polylines.

    Returns a list of cells; each cell is a list of (piece polygon in the unit
    square, integer offset) such that the shifted pieces assemble into one
    planar polygon.
    """
    lines = []
    for V in leaves:
        segs, _ = torus_segments(V)
        lines.extend(segs)
    lines.extend([((0, 0), (1, 0)), ((1, 0), (1, 1)), ((1, 1), (0, 1)), ((0, 1), (0, 0))])
    noded = unary_union(MultiLineString([list(map(tuple, s)) for s in lines]))
    # faces below SLIVER are noding artefacts of lines meeting at a shared vertex
    pieces = [p for p in polygonize(noded) if p.area > SLIVER]
    uf = _UnionFind(len(pieces))
    links = []
    for side, off in ((0, (-1, 0)), (1, (0, -1))):
        low = [(lo, hi, i) for i, poly in enumerate(pieces) for lo, hi in _side_intervals(poly, side, 0.0)]
        high = [(lo, hi, i) for i, poly in enumerate(pieces) for lo, hi in _side_intervals(poly, side, 1.0)]
        pairs = _overlaps(low, high)
        covered = sum(hi - lo for lo, hi, _ in low)
        if abs(covered - 1.0) > 1e-9:
            raise PartitionNotClosed(f"seam {side} covered to {covered}")
        for i, j in pairs:
            uf.union(i, j)
            links.append((i, j, off))
    groups: dict[int, list[int]] = {}
    for i in range(len(pieces)):
        groups.setdefault(uf.find(i), []).append(i)
    # offsets by breadth-first search over the gluing links
    adj: dict[int, list] = {}
    for i, j, off in links:
        adj.setdefault(i, []).append((j, off))
        adj.setdefault(j, []).append((i, (-off[0], -off[1])))
    cells = []
    for members in groups.values():
        offs = {members[0]: (0, 0)}
        stack = [members[0]]
        while stack:
            i = stack.pop()
            for j, off in adj.get(i, []):
                o = (offs[i][0] + off[0], offs[i][1] + off[1])
                if j not in offs:
                    offs[j] = o
                    stack.append(j)
                elif offs[j] != o:
                    raise PartitionNotClosed("a face wraps around the torus")
        cells.append([(pieces[i], offs[i]) for i in members])
    return cells


def _assemble(cell) -> Polygon:
    shifted = [shapely.affinity.translate(p, o[0], o[1]) for p, o in cell]
    return unary_union(shifted) if len(shifted) > 1 else shifted[0]


# ------------------------------------------------------------ partitions


@dataclass
class MarkovPartition:
    """Cells of one refinement level with their words, transitions and Parry data.

    Level n is cut by F^{-n}(stable arms) and F^{n+1}(unstable arms); its
    words run over times -n, ..., n.  ``transition`` is a sparse 0/1 matrix.
    """

    level: int
    cells: list
    polygons: list
    words: list
    base_matrix: np.ndarray
    transition: np.ndarray
    perron_root: float
    masses: np.ndarray
    areas: np.ndarray
    d_s: float = math.nan
    d_u: float = math.nan
    meta: dict = field(default_factory=dict)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def to_json(self) -> str:
        return json.dumps({
            "level": self.level,
            "cells": [[list(map(list, np.asarray(p.exterior.coords)))] for p in self.polygons],
            "words": [list(map(int, w)) for w in self.words],
            "transition_edges": np.column_stack(sparse.coo_matrix(self.transition).nonzero()).tolist(),
            "parry": self.masses.tolist(),
            "perron_root": self.perron_root,
        })


def perron_data(A: np.ndarray, tol: float = 1e-12, max_iter: int = 100_000):
    """Perron root with left and right eigenvectors normalized so u . v = 1.

    Power iteration on A + I, which has the same eigenvectors and is
    primitive whenever A is irreducible.
    """
    A = sparse.csr_matrix(A, dtype=float)
    n = A.shape[0]
    ncomp, _ = connected_components(A > 0, directed=True, connection="strong")
    if ncomp != 1:
        raise Reducible(f"transition matrix has {ncomp} strongly connected components")
    B = (A + sparse.identity(n, format="csr")).tocsr()
    Bt = B.T.tocsr()

    def power(Mx):
        x = np.ones(n) / n
        for _ in range(max_iter):
            y = Mx @ x
            y /= y.sum()
            if np.max(np.abs(y - x)) < tol:
                return y
            x = y
        return x

    v = power(B)
    u = power(Bt)
    lam = float((A @ v).sum() / v.sum())
    u = u / (u @ v)
    return lam, u, v


def parry_measure(partition: MarkovPartition):
    """(transition matrix, stationary vector u_i v_i, cell masses)."""
    _, u, v = perron_data(partition.base_matrix)
    return partition.transition, u * v, partition.masses


def _locator(polys):
    tree = shapely.STRtree(polys)

    def locate(pts):
        geoms = shapely.points(pts)
        # "intersects" so points on a square side (a gluing seam, not a leaf) resolve
        ip, ic = tree.query(geoms, predicate="intersects")
        out = np.full(len(pts), -1)
        out[ip[::-1]] = ic[::-1]
        return out

    return locate


def _cell_pieces_locator(cells):
    polys = []
    owner = []
    for k, cell in enumerate(cells):
        for p, _ in cell:
            polys.append(p)
            owner.append(k)
    owner = np.asarray(owner)
    loc = _locator(polys)
    return lambda pts: np.where((r := loc(pts)) >= 0, owner[np.maximum(r, 0)], -1)


def _eigen_extent(poly: Polygon, M: HyperbolicMatrix):
    xy = np.asarray(poly.exterior.coords)
    xi = xy @ M.eigenbasis.E_inv.T
    ext = xi.max(axis=0) - xi.min(axis=0)
    return float(ext[1]), float(ext[0])  # (stable size, unstable size)


def _reps(cells) -> np.ndarray:
    return np.array([max(c, key=lambda t: t[0].area)[0].representative_point().coords[0] for c in cells])


class AdlerWeiss:
    """Builder for the Adler-Weiss rectangles and their refinements.

    The rectangles R_i are the faces of the frozen arms.  The symbols of the
    coding are the level-0 cells, the faces of the stable arms together with
    F(unstable arms); these are the pieces of R_i cap F(R_j), and using them
    rather than the R_i keeps every transition a single connected crossing.
    """

    def __init__(self, M: HyperbolicMatrix, params: TwistParams | None = None, arm_spec=CLASSICAL_ARMS):
        self.pl = PiecewiseLinearTwist(M, params)
        self.M = M
        self.arms, self.frozen = freeze_arms(self.pl, arm_spec=arm_spec)
        self.rectangles = torus_faces([a.vertices for a in self.arms])
        self.symbols = torus_faces(self._leaves(0))
        for cell in self.symbols:
            if sum(p.area for p, _ in cell) < 1e-14:
                raise DegenerateCell("level-0 cell of zero area")
        self._locate = _cell_pieces_locator(self.symbols)
        self._levels: dict[int, MarkovPartition] = {}
        self._A = None

    @property
    def unstable_arms(self):
        return [a for a in self.arms if a.flavor == "unstable"]

    @property
    def stable_arms(self):
        return [a for a in self.arms if a.flavor == "stable"]

    def _leaves(self, n: int) -> list[np.ndarray]:
        """F^{-n}(stable arms) and F^{n+1}(unstable arms)."""
        out = [push_leaf(self.pl, a, n).vertices for a in self.stable_arms]
        out += [push_leaf(self.pl, a, n + 1).vertices for a in self.unstable_arms]
        return out

    def itineraries(self, pts: np.ndarray, past: int, future: int) -> np.ndarray:
        """Symbols of F^k p for k = -past, ..., future."""
        cols = {0: self._locate(pts)}
        q = pts.copy()
        for k in range(1, future + 1):
            q = self.pl.torus_forward(q)
            cols[k] = self._locate(q)
        q = pts.copy()
        for k in range(1, past + 1):
            q = self.pl.torus_inverse(q)
            cols[-k] = self._locate(q)
        w = np.column_stack([cols[k] for k in range(-past, future + 1)])
        if np.any(w < 0):
            raise PartitionNotClosed("an itinerary point fell outside every cell")
        return w

    @property
    def base_matrix(self) -> np.ndarray:
        """A[i, j] = number of faces of F(c_i) cap c_j; 0/1 for a proper coding."""
        if self._A is None:
            faces = torus_faces(self._leaves(0)[:len(self.stable_arms)] + [push_leaf(self.pl, a, 2).vertices
                                                       for a in self.unstable_arms])
            w = self.itineraries(_reps(faces), 1, 0)
            k = len(self.symbols)
            A = np.zeros((k, k), dtype=np.int64)
            np.add.at(A, (w[:, 0], w[:, 1]), 1)
            self._A = A
        return self._A

    def level(self, n: int, max_cells: int = 400_000) -> MarkovPartition:
        if n in self._levels:
            return self._levels[n]
        if n < 0:
            raise ValueError("levels start at 0")
        leaves = self._leaves(n)
        n_vert = sum(len(V) for V in leaves)
        if n_vert > 50 * max_cells:
            raise BudgetExceeded(f"level {n} needs {n_vert} leaf vertices")
        cells = self.symbols if n == 0 else torus_faces(leaves)
        if len(cells) > max_cells:
            raise BudgetExceeded(f"level {n} has {len(cells)} cells")
        polys = [_assemble(c) for c in cells]
        areas = np.array([sum(p.area for p, _ in c) for c in cells])
        if np.any(areas < 1e-14):
            raise DegenerateCell(f"level {n}: cell of area {areas.min():.3g}")
        words = self.itineraries(_reps(cells), n, n)
        A = self.base_matrix
        lam, u, v = perron_data(A)
        masses = u[words[:, 0]] * v[words[:, -1]] / lam ** (2 * n)
        T = sparse.csr_matrix(A) if n == 0 else self._higher_block(words)
        sizes = np.array([_eigen_extent(p, self.M) if isinstance(p, Polygon) else (math.nan, math.nan)
                          for p in polys])
        part = MarkovPartition(
            level=n, cells=cells, polygons=polys, words=[tuple(map(int, w)) for w in words], base_matrix=A,
            transition=T, perron_root=perron_data(T)[0], masses=masses, areas=areas,
            d_s=float(np.nanmax(sizes[:, 0])), d_u=float(np.nanmax(sizes[:, 1])),
            meta={"area_sum": float(areas.sum()), "mass_sum": float(masses.sum()),
                  "distinct_words": len(set(map(tuple, words)))},
        )
        self._levels[n] = part
        return part

    @staticmethod
    def _higher_block(words: np.ndarray) -> np.ndarray:
        """Transitions between words: W -> W' iff W[1:] == W'[:-1]."""
        n = len(words)
        head = {}
        for j, w in enumerate(map(tuple, words[:, :-1])):
            head.setdefault(w, []).append(j)
        rows, cols = [], []
        for i, w in enumerate(map(tuple, words[:, 1:])):
            for j in head.get(w, []):
                rows.append(i)
                cols.append(j)
        return sparse.csr_matrix((np.ones(len(rows), dtype=np.int64), (rows, cols)), shape=(n, n))


def build_base_partition(M: HyperbolicMatrix, params: TwistParams | None = None) -> MarkovPartition:
    """The level-0 partition {R_i cap F(R_j)}."""
    return AdlerWeiss(M, params).level(0)


def refine(builder: AdlerWeiss, n: int) -> MarkovPartition:
    return builder.level(n)


def cells_inside(partition: MarkovPartition, interval: tuple[float, float]) -> np.ndarray:
    """Cells lying wholly in the vertical strip lo <= x <= hi (mod 1)."""
    lo, hi = interval
    out = np.zeros(partition.n_cells, dtype=bool)
    for k, p in enumerate(partition.polygons):
        x0, _, x1, _ = p.bounds
        shift = math.floor(x0)
        out[k] = (x0 - shift >= lo) and (x1 - shift <= hi)
    return out


def mme_strip_mass(partition: MarkovPartition, strip) -> float:
    """Q: Parry mass of the cells inside the strip; a lower bound on its MME mass."""
    if isinstance(strip, StripRegions):
        strip = strip.S2_w
    return float(partition.masses[cells_inside(partition, strip)].sum())


def first_level_inside(builder: AdlerWeiss, strip: tuple[float, float], n_cap: int = 12):
    """Lowest level with a cell inside the strip, with that level's partition."""
    for n in range(0, n_cap + 1):
        part = builder.level(n)
        if cells_inside(part, strip).any():
            return n, part
    return None, None


def markov_consistency(builder: AdlerWeiss, part: MarkovPartition, n_samples: int = 2000,
                       seed: int = 0) -> float:
    """Fraction of random points p whose cell transition c(p) -> c(F p) is allowed by the matrix."""
    rng = np.random.default_rng(seed)
    pts = rng.random((n_samples, 2))
    loc = _cell_pieces_locator(part.cells)
    a = loc(pts)
    b = loc(builder.pl.torus_forward(pts))
    ok = (a >= 0) & (b >= 0)
    T = sparse.csr_matrix(part.transition)
    return float(np.asarray(T[a[ok], b[ok]]).ravel().mean())
