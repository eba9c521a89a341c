"""Exact Adler-Weiss face counts for A = [[2, 1], [1, 1]] in Q(sqrt 5).

Independent of the package: arms are rays from the origin along the exact
eigenvectors e_u = (2, sqrt5 - 1), e_s = (2, -1 - sqrt5); a point of an arm
is a * e_u (or b * e_s) with a, b in Q(sqrt5).  Crossings solve
a e_u - b e_s = k for integer k, and all comparisons are exact.

On the torus every face of the arm graph is a disk, so Euler gives
F = E - V, with E half the degree sum: the origin has one edge per arm, an
interior crossing four and a T-junction (an arm tip on another arm) three.
"""
from __future__ import annotations

import functools
from fractions import Fraction


@functools.total_ordering
class Q5:
    """p + q sqrt5 with rational p, q."""

    __slots__ = ("p", "q")

    def __init__(self, p, q=0):
        self.p = Fraction(p)
        self.q = Fraction(q)

    def __add__(self, o):
        o = _q5(o)
        return Q5(self.p + o.p, self.q + o.q)

    __radd__ = __add__

    def __neg__(self):
        return Q5(-self.p, -self.q)

    def __sub__(self, o):
        return self + (-_q5(o))

    def __rsub__(self, o):
        return _q5(o) - self

    def __mul__(self, o):
        o = _q5(o)
        return Q5(self.p * o.p + 5 * self.q * o.q, self.p * o.q + self.q * o.p)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        out = Q5(1)
        for _ in range(n):
            out = out * self
        return out

    def conj(self):
        return Q5(self.p, -self.q)

    def __truediv__(self, o):
        o = _q5(o)
        n = o.p * o.p - 5 * o.q * o.q
        num = self * o.conj()
        return Q5(num.p / n, num.q / n)

    def sign(self) -> int:
        sp, sq = (self.p > 0) - (self.p < 0), (self.q > 0) - (self.q < 0)
        if sp == 0 or sq == 0 or sp == sq:
            return sp or sq
        # opposite signs: compare p^2 with 5 q^2
        d = self.p * self.p - 5 * self.q * self.q
        return sp if d > 0 else (-sp if d < 0 else 0)

    def __eq__(self, o):
        return (self - _q5(o)).sign() == 0

    def __lt__(self, o):
        return (self - _q5(o)).sign() < 0

    def __hash__(self):
        return hash((self.p, self.q))

    def __float__(self):
        return float(self.p) + float(self.q) * 5 ** 0.5

    def floor(self) -> int:
        f = int(float(self) // 1)
        # fix a float misjudgement at integer boundaries
        while Q5(f) > self:
            f -= 1
        while Q5(f + 1) <= self:
            f += 1
        return f


def _q5(x) -> Q5:
    return x if isinstance(x, Q5) else Q5(x)


E_U = (Q5(2), Q5(-1, 1))
E_S = (Q5(2), Q5(-1, -1))
NORM2_U = E_U[0] * E_U[0] + E_U[1] * E_U[1]
NORM2_S = E_S[0] * E_S[0] + E_S[1] * E_S[1]
LAMBDA = Q5(Fraction(3, 2), Fraction(1, 2))


def _crossings(sigma: int, tau: int, a_max: Q5, b_max: Q5):
    """All (a, b) with 0 < a <= a_max, 0 < b <= b_max and sigma a e_u - tau b e_s in Z^2.

    a and b are parameters along the unnormalized eigenvectors.
    """
    # [sigma e_u, -tau e_s] (a, b)^T = k
    m00, m01 = sigma * E_U[0], -tau * E_S[0]
    m10, m11 = sigma * E_U[1], -tau * E_S[1]
    det = m00 * m11 - m01 * m10
    reach = int(4 * (float(a_max) + float(b_max))) + 2
    out = []
    for kx in range(-reach, reach + 1):
        for ky in range(-reach, reach + 1):
            a = (m11 * kx - m01 * ky) / det
            b = (m00 * ky - m10 * kx) / det
            if a.sign() > 0 and b.sign() > 0 and a <= a_max and b <= b_max:
                out.append((a, b))
    return out


def _len2(param: Q5, flavor: str) -> Q5:
    return param * param * (NORM2_U if flavor == "u" else NORM2_S)


def freeze(arms, budget: Q5):
    """Equal-speed growth; each arm stops at its first contact with a grown arm of the other flavour.

    ``arms`` is a list of (flavor, sign).  Returns the frozen parameter of each arm.
    """
    events = []
    for i, (fi, si) in enumerate(arms):
        for j, (fj, sj) in enumerate(arms):
            if fi == "u" and fj == "s":
                for a, b in _crossings(si, sj, budget, budget):
                    events.append((i, a, j, b))

    def key(ev):
        i, a, j, b = ev
        la, lb = _len2(a, "u"), _len2(b, "s")
        return la if la >= lb else lb

    events.sort(key=functools.cmp_to_key(lambda x, y: (key(x) > key(y)) - (key(x) < key(y))))
    frozen = [None] * len(arms)
    for i, a, j, b in events:
        la, lb = _len2(a, "u"), _len2(b, "s")
        if la == lb:
            if frozen[i] is None and frozen[j] is None:
                frozen[i], frozen[j] = a, b
        elif la > lb:
            if frozen[i] is None and (frozen[j] is None or frozen[j] >= b):
                frozen[i] = a
        elif frozen[j] is None and (frozen[i] is None or frozen[i] >= a):
            frozen[j] = b
    if any(f is None for f in frozen):
        raise RuntimeError("budget too small")
    return frozen


def arm_lengths(arms, budget=Q5(1)):
    """Frozen arclengths as floats (for comparison with the floating construction)."""
    fr = freeze(arms, budget)
    return [float(_len2(a, f)) ** 0.5 for a, (f, _) in zip(fr, arms)]


def _faces(arms, a_max: dict, b_max: dict) -> int:
    """F = E - V from the degree sum: interior crossings have degree 4, tips on another arm 3."""
    deg = len(arms)  # the origin
    V = 1
    tips_used = set()
    for i, (_, si) in enumerate(arms):
        for j, (_, sj) in enumerate(arms):
            if i in a_max and j in b_max:
                for a, b in _crossings(si, sj, a_max[i], b_max[j]):
                    V += 1
                    tip_i, tip_j = a == a_max[i], b == b_max[j]
                    deg += 4 - tip_i - tip_j
                    tips_used.update([i] * tip_i + [j] * tip_j)
    free = len(arms) - len(tips_used)  # arms ending in the open: degree-1 vertices
    V += free
    deg += free
    return deg // 2 - V


def face_count(arms, level: int, budget=Q5(1)) -> int:
    """Faces of F^{-level}(stable arms) together with F^{level+1}(unstable arms)."""
    fr = freeze(arms, budget)
    a_max = {i: fr[i] * LAMBDA ** (level + 1) for i, (f, _) in enumerate(arms) if f == "u"}
    b_max = {i: fr[i] * LAMBDA ** level for i, (f, _) in enumerate(arms) if f == "s"}
    return _faces(arms, a_max, b_max)


def rectangle_count(arms, budget=Q5(1)) -> int:
    fr = freeze(arms, budget)
    a_max = {i: fr[i] for i, (f, _) in enumerate(arms) if f == "u"}
    b_max = {i: fr[i] for i, (f, _) in enumerate(arms) if f == "s"}
    return _faces(arms, a_max, b_max)
