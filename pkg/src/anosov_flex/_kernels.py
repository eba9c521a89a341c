"""Compiled inner loops shared by the map handles.

Every map in the package (the linear model, the twist family and the
slow-down family) is evaluated by a single kernel, ``step``, driven by a flat
parameter vector ``prm`` plus three lookup tables.  Layout constants live at
module level so the Python side can fill ``prm`` by name.
"""
import math

import numpy as np
from numba import njit, prange

# matrix
P_A, P_B, P_C, P_D = 0, 1, 2, 3
# twist strip
P_TW_ON, P_M, P_L, P_DELTA, P_BETA, P_W = 4, 5, 6, 7, 8, 9
P_BP0, P_BP1, P_BP2, P_DS0, P_DS1, P_DS2 = 10, 11, 12, 13, 14, 15
# slow-down disk
P_SD_ON, P_LAM, P_R0, P_R1, P_ETA, P_ALPHA = 16, 17, 18, 19, 20, 21
P_ULO, P_U1, P_R0SQ = 22, 23, 24
P_E00, P_E01, P_E10, P_E11 = 25, 26, 27, 28
P_EI00, P_EI01, P_EI10, P_EI11 = 29, 30, 31, 32
P_RTOL, P_ATOL, P_UFLAT = 33, 34, 35
P_CM, P_RA, P_RB, P_X0 = 36, 37, 38, 39
P_MAXSTEP = 40
NPRM = 48

ST_OK = 0
ST_INTEGRATION = 1


# ---------------------------------------------------------------- utilities

@njit(cache=True, inline="always")
def frac(v):
    r = v - math.floor(v)
    if r >= 1.0:
        r = 0.0
    return r


@njit(cache=True, inline="always")
def centered(v):
    """Representative of v mod 1 in [-1/2, 1/2)."""
    return v - math.floor(v + 0.5)


@njit(cache=True)
def smoothstep(t):
    """C-infinity step 0 -> 1 on [0, 1] and its derivative."""
    if t <= 0.0:
        return 0.0, 0.0
    if t >= 1.0:
        return 1.0, 0.0
    a = math.exp(-1.0 / t)
    b = math.exp(-1.0 / (1.0 - t))
    s = a / (a + b)
    ds = s * (1.0 - s) * (1.0 / (t * t) + 1.0 / ((1.0 - t) * (1.0 - t)))
    return s, ds


@njit(cache=True, inline="always")
def quintic_hermite(tab, x0, h, x):
    """Evaluate a uniform-grid quintic Hermite table of (f, f', f'') rows."""
    n = tab.shape[0] - 1
    q = (x - x0) / h
    i = int(q)
    if i < 0:
        i = 0
    elif i >= n:
        i = n - 1
    t = q - i
    t2 = t * t
    t3 = t2 * t
    t4 = t3 * t
    t5 = t4 * t
    h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5
    h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5
    h2 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5)
    h3 = 0.5 * (t3 - 2.0 * t4 + t5)
    h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5
    h5 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5
    return (tab[i, 0] * h0 + h * tab[i, 1] * h1 + h * h * tab[i, 2] * h2
            + h * h * tab[i + 1, 2] * h3 + h * tab[i + 1, 1] * h4 + tab[i + 1, 0] * h5)


# ---------------------------------------------------------------- mollifier

@njit(cache=True)
def bump_moments(z, glx, glw):
    """CDF and first moment of the unit bump on [-1, z] by Gauss-Legendre.

    ``glw`` already carries the 1/mass normalization.
    """
    if z <= -1.0:
        return 0.0, 0.0
    if z >= 1.0:
        return 1.0, 0.0
    half = 0.5 * (z + 1.0)
    c0 = 0.0
    c1 = 0.0
    for k in range(glx.shape[0]):
        t = -1.0 + half * (glx[k] + 1.0)
        e = math.exp(-1.0 / (1.0 - t * t))
        c0 += glw[k] * e
        c1 += glw[k] * e * t
    return half * c0, half * c1


@njit(cache=True, inline="always")
def _ramp(z, w, glx, glw):
    """Mollified positive part (z)^+ and its slope."""
    if w == 0.0:
        if z > 0.0:
            return z, 1.0
        return 0.0, 0.0
    if z <= -w:
        return 0.0, 0.0
    if z >= w:
        return z, 1.0
    zeta = z / w
    cdf, m1 = bump_moments(zeta, glx, glw)
    return w * (zeta * cdf - m1), cdf


@njit(cache=True)
def twist_profile(x, prm, glx, glw):
    """Lift of the (mollified) twist profile at x in [0,1) and its slope."""
    if prm[P_TW_ON] == 0.0:
        return x, 1.0
    w = prm[P_W]
    f = x
    df = 1.0
    for k in range(3):
        r, s = _ramp(x - prm[P_BP0 + k], w, glx, glw)
        f += prm[P_DS0 + k] * r
        df += prm[P_DS0 + k] * s
    return f, df


# ---------------------------------------------------------------- base maps

@njit(cache=True)
def base_forward(x, y, prm, glx, glw):
    a = prm[P_A]
    b = prm[P_B]
    c = prm[P_C]
    d = prm[P_D]
    ab = abs(b)
    sb = 1.0 if b > 0 else -1.0
    f, t = twist_profile(x, prm, glx, glw)
    g = f - x
    X = frac(a * x + b * y + ab * g)
    Y = frac(c * x + d * y + sb * d * g)
    return X, Y, a + ab * (t - 1.0), b, c + sb * d * (t - 1.0), d


@njit(cache=True)
def base_inverse(X, Y, prm, glx, glw):
    """Closed-form inverse; Jacobian returned is D(F^{-1}) at (X, Y)."""
    a = prm[P_A]
    b = prm[P_B]
    c = prm[P_C]
    d = prm[P_D]
    ab = abs(b)
    sb = 1.0 if b > 0 else -1.0
    x = frac(d * X - b * Y)
    f, t = twist_profile(x, prm, glx, glw)
    y = frac(-c * X + a * Y - sb * (f - x))
    return x, y, d, -b, -(c + sb * d * (t - 1.0)), a + ab * (t - 1.0)


# ---------------------------------------------------------------- profiles

@njit(cache=True)
def psi0_eval(u, prm, psitab):
    """psi_0 and its derivative."""
    r0sq = prm[P_R0SQ]
    alpha = prm[P_ALPHA]
    u1 = prm[P_U1]
    if u >= u1:
        return 1.0, 0.0
    if u <= 0.0:
        return 0.0, 0.0
    v = u / r0sq
    p = v ** (1.0 + alpha)
    dp = (1.0 + alpha) / r0sq * v ** alpha
    ulo = prm[P_ULO]
    if u <= ulo:
        return p, dp
    rise, _ = smoothstep((u - prm[P_RA]) / (prm[P_RB] - prm[P_RA]))
    drop, _ = smoothstep((u - prm[P_X0]) / (u1 - prm[P_X0]))
    cm = prm[P_CM]
    mult = 1.0 + (cm - 1.0) * rise - cm * drop
    h = (u1 - ulo) / (psitab.shape[0] - 1)
    return quintic_hermite(psitab, ulo, h, u), dp * mult


@njit(cache=True)
def psi_eta_eval(u, prm, psitab, itab):
    """psi_eta(u) = psi_0(eta * h(u / eta)) with h a smooth max(x, 1/2)."""
    eta = prm[P_ETA]
    if eta >= 2.0 * prm[P_R0SQ] or u >= prm[P_UFLAT]:
        return 1.0, 0.0
    x = u / eta
    if x <= 0.25:
        ps, _ = psi0_eval(0.5 * eta, prm, psitab)
        return ps, 0.0
    if x >= 0.75:
        return psi0_eval(u, prm, psitab)
    tau = 2.0 * (x - 0.25)
    hint = quintic_hermite(itab, 0.0, 1.0 / (itab.shape[0] - 1), tau)
    slope, _ = smoothstep(tau)
    phi = eta * (0.5 + 0.5 * hint)
    ps, dps = psi0_eval(phi, prm, psitab)
    return ps, dps * slope


# ---------------------------------------------------------------- flow

@njit(cache=True, inline="always")
def _rhs(y, sign, prm, psitab, itab, out):
    lam = prm[P_LAM]
    s1 = y[0]
    s2 = y[1]
    ps, dps = psi_eta_eval(s1 * s1 + s2 * s2, prm, psitab, itab)
    k = sign * lam
    out[0] = k * s1 * ps
    out[1] = -k * s2 * ps
    c00 = k * (ps + 2.0 * s1 * s1 * dps)
    c01 = k * 2.0 * s1 * s2 * dps
    c10 = -c01
    c11 = -k * (ps + 2.0 * s2 * s2 * dps)
    out[2] = c00 * y[2] + c01 * y[4]
    out[3] = c00 * y[3] + c01 * y[5]
    out[4] = c10 * y[2] + c11 * y[4]
    out[5] = c10 * y[3] + c11 * y[5]


@njit(cache=True)
def _linear_min_u(s1, s2, lam):
    """Minimum of s1^2 e^{2 lam t} + s2^2 e^{-2 lam t} over t in [0, 1]."""
    a = s1 * s1
    b = s2 * s2
    if a == 0.0:
        return b * math.exp(-2.0 * lam)
    if b == 0.0:
        return a
    ts = math.log(b / a) / (4.0 * lam)
    if ts <= 0.0:
        return a + b
    if ts >= 1.0:
        return a * math.exp(2.0 * lam) + b * math.exp(-2.0 * lam)
    return 2.0 * math.sqrt(a * b)


@njit(cache=True)
def flow_time_one(s1, s2, sign, prm, psitab, itab):
    """Time-one (sign=+1) or time-minus-one (sign=-1) map of the slow-down flow.

    Returns (s1', s2', A00, A01, A10, A11, steps, status) with A the
    variational matrix.  Trajectories that never reach the slowed zone are
    returned in closed form.
    """
    lam = prm[P_LAM]
    if sign > 0:
        umin = _linear_min_u(s1, s2, lam)
    else:
        umin = _linear_min_u(s2, s1, lam)
    if umin >= prm[P_UFLAT]:
        e = math.exp(sign * lam)
        return s1 * e, s2 / e, e, 0.0, 0.0, 1.0 / e, 0, ST_OK

    rtol = prm[P_RTOL]
    atol = prm[P_ATOL]
    maxstep = int(prm[P_MAXSTEP])
    y = np.empty(6)
    y[0] = s1
    y[1] = s2
    y[2] = 1.0
    y[3] = 0.0
    y[4] = 0.0
    y[5] = 1.0
    k = np.empty((7, 6))
    yt = np.empty(6)
    yn = np.empty(6)
    _rhs(y, sign, prm, psitab, itab, k[0])
    t = 0.0
    h = 0.05
    steps = 0
    while t < 1.0:
        if steps >= maxstep:
            return y[0], y[1], y[2], y[3], y[4], y[5], steps, ST_INTEGRATION
        if t + h > 1.0:
            h = 1.0 - t
        for i in range(6):
            yt[i] = y[i] + h * (0.2 * k[0, i])
        _rhs(yt, sign, prm, psitab, itab, k[1])
        for i in range(6):
            yt[i] = y[i] + h * (3.0 / 40.0 * k[0, i] + 9.0 / 40.0 * k[1, i])
        _rhs(yt, sign, prm, psitab, itab, k[2])
        for i in range(6):
            yt[i] = y[i] + h * (44.0 / 45.0 * k[0, i] - 56.0 / 15.0 * k[1, i] + 32.0 / 9.0 * k[2, i])
        _rhs(yt, sign, prm, psitab, itab, k[3])
        for i in range(6):
            yt[i] = y[i] + h * (19372.0 / 6561.0 * k[0, i] - 25360.0 / 2187.0 * k[1, i]
                                + 64448.0 / 6561.0 * k[2, i] - 212.0 / 729.0 * k[3, i])
        _rhs(yt, sign, prm, psitab, itab, k[4])
        for i in range(6):
            yt[i] = y[i] + h * (9017.0 / 3168.0 * k[0, i] - 355.0 / 33.0 * k[1, i]
                                + 46732.0 / 5247.0 * k[2, i] + 49.0 / 176.0 * k[3, i]
                                - 5103.0 / 18656.0 * k[4, i])
        _rhs(yt, sign, prm, psitab, itab, k[5])
        for i in range(6):
            yn[i] = y[i] + h * (35.0 / 384.0 * k[0, i] + 500.0 / 1113.0 * k[2, i]
                                + 125.0 / 192.0 * k[3, i] - 2187.0 / 6784.0 * k[4, i]
                                + 11.0 / 84.0 * k[5, i])
        _rhs(yn, sign, prm, psitab, itab, k[6])
        err = 0.0
        for i in range(6):
            e = h * (71.0 / 57600.0 * k[0, i] - 71.0 / 16695.0 * k[2, i]
                     + 71.0 / 1920.0 * k[3, i] - 17253.0 / 339200.0 * k[4, i]
                     + 22.0 / 525.0 * k[5, i] - 1.0 / 40.0 * k[6, i])
            sc = atol + rtol * max(abs(y[i]), abs(yn[i]))
            r = abs(e) / sc
            if r > err:
                err = r
        steps += 1
        if err <= 1.0:
            t += h
            for i in range(6):
                y[i] = yn[i]
                k[0, i] = k[6, i]
            if err == 0.0:
                fac = 5.0
            else:
                fac = min(5.0, max(0.2, 0.9 * err ** -0.2))
        else:
            fac = max(0.2, 0.9 * err ** -0.2)
        h *= fac
        if h < 1e-12:
            return y[0], y[1], y[2], y[3], y[4], y[5], steps, ST_INTEGRATION
    return y[0], y[1], y[2], y[3], y[4], y[5], steps, ST_OK


# ---------------------------------------------------------------- composite

@njit(cache=True, inline="always")
def _conj(prm, a00, a01, a10, a11):
    """E A E^{-1}: chart derivative to torus derivative."""
    e00 = prm[P_E00]
    e01 = prm[P_E01]
    e10 = prm[P_E10]
    e11 = prm[P_E11]
    i00 = prm[P_EI00]
    i01 = prm[P_EI01]
    i10 = prm[P_EI10]
    i11 = prm[P_EI11]
    m00 = e00 * a00 + e01 * a10
    m01 = e00 * a01 + e01 * a11
    m10 = e10 * a00 + e11 * a10
    m11 = e10 * a01 + e11 * a11
    return (m00 * i00 + m01 * i10, m00 * i01 + m01 * i11,
            m10 * i00 + m11 * i10, m10 * i01 + m11 * i11)


@njit(cache=True, inline="always")
def chart_of(x, y, prm):
    xt = centered(x)
    yt = centered(y)
    return prm[P_EI00] * xt + prm[P_EI01] * yt, prm[P_EI10] * xt + prm[P_EI11] * yt


@njit(cache=True)
def step(x, y, inverse, prm, psitab, itab, glx, glw):
    """One application of the map (or its inverse) with its Jacobian.

    Returns (X, Y, J00, J01, J10, J11, status).
    """
    if not inverse:
        if prm[P_SD_ON] != 0.0:
            s1, s2 = chart_of(x, y, prm)
            r1 = prm[P_R1]
            if s1 * s1 + s2 * s2 <= r1 * r1:
                q1, q2, a00, a01, a10, a11, _, st = flow_time_one(s1, s2, 1.0, prm, psitab, itab)
                X = frac(prm[P_E00] * q1 + prm[P_E01] * q2)
                Y = frac(prm[P_E10] * q1 + prm[P_E11] * q2)
                j00, j01, j10, j11 = _conj(prm, a00, a01, a10, a11)
                return X, Y, j00, j01, j10, j11, st
        X, Y, j00, j01, j10, j11 = base_forward(x, y, prm, glx, glw)
        return X, Y, j00, j01, j10, j11, ST_OK
    px, py, j00, j01, j10, j11 = base_inverse(x, y, prm, glx, glw)
    if prm[P_SD_ON] != 0.0:
        s1, s2 = chart_of(px, py, prm)
        r1 = prm[P_R1]
        if s1 * s1 + s2 * s2 <= r1 * r1:
            e = math.exp(prm[P_LAM])
            q1, q2, a00, a01, a10, a11, _, st = flow_time_one(s1 * e, s2 / e, -1.0, prm, psitab, itab)
            X = frac(prm[P_E00] * q1 + prm[P_E01] * q2)
            Y = frac(prm[P_E10] * q1 + prm[P_E11] * q2)
            j00, j01, j10, j11 = _conj(prm, a00, a01, a10, a11)
            return X, Y, j00, j01, j10, j11, st
    return px, py, j00, j01, j10, j11, ST_OK


# ---------------------------------------------------------------- batch loops

@njit(cache=True)
def map_many(pts, inverse, prm, psitab, itab, glx, glw):
    n = pts.shape[0]
    out = np.empty((n, 2))
    jac = np.empty((n, 2, 2))
    status = np.zeros(n, dtype=np.int64)
    for i in range(n):
        X, Y, j00, j01, j10, j11, st = step(pts[i, 0], pts[i, 1], inverse, prm, psitab, itab, glx, glw)
        out[i, 0] = X
        out[i, 1] = Y
        jac[i, 0, 0] = j00
        jac[i, 0, 1] = j01
        jac[i, 1, 0] = j10
        jac[i, 1, 1] = j11
        status[i] = st
    return out, jac, status


@njit(cache=True)
def iterate_with_jacobian(x, y, n, inverse, prm, psitab, itab, glx, glw):
    """f^n(x, y) and D f^n, plus a failure flag."""
    m00 = 1.0
    m01 = 0.0
    m10 = 0.0
    m11 = 1.0
    bad = 0
    for _ in range(n):
        X, Y, j00, j01, j10, j11, st = step(x, y, inverse, prm, psitab, itab, glx, glw)
        bad |= st
        n00 = j00 * m00 + j01 * m10
        n01 = j00 * m01 + j01 * m11
        n10 = j10 * m00 + j11 * m10
        n11 = j10 * m01 + j11 * m11
        m00, m01, m10, m11 = n00, n01, n10, n11
        x = X
        y = Y
    return x, y, m00, m01, m10, m11, bad


@njit(cache=True, parallel=True)
def birkhoff_orbits(starts, v0, n_iters, burn_in, inverse, prm, psitab, itab, glx, glw):
    """Per-orbit time averages of log|Df v| along a normalized tangent cocycle."""
    n = starts.shape[0]
    means = np.empty(n)
    status = np.zeros(n, dtype=np.int64)
    for i in prange(n):
        x = starts[i, 0]
        y = starts[i, 1]
        v1 = v0[0]
        v2 = v0[1]
        acc = 0.0
        bad = 0
        for it in range(burn_in + n_iters):
            X, Y, j00, j01, j10, j11, st = step(x, y, inverse, prm, psitab, itab, glx, glw)
            bad |= st
            w1 = j00 * v1 + j01 * v2
            w2 = j10 * v1 + j11 * v2
            nr = math.sqrt(w1 * w1 + w2 * w2)
            v1 = w1 / nr
            v2 = w2 / nr
            if it >= burn_in:
                acc += math.log(nr)
            x = X
            y = Y
        means[i] = acc / n_iters
        status[i] = bad
    return means, status


@njit(cache=True)
def _direction_fast(x, y, n_max, tol, v0, inverse, prm, psitab, itab, glx, glw):
    """Single-pass variant: pull back n_max, push forward, track settling.

    The angle between consecutive pushed vectors measures convergence of the
    pushed direction at intermediate orbit points, which bounds the error at
    the target point because the cocycle contracts angles.
    """
    back = not inverse
    orb = np.empty((n_max + 1, 2))
    orb[0, 0] = x
    orb[0, 1] = y
    for k in range(n_max):
        X, Y, _, _, _, _, _ = step(orb[k, 0], orb[k, 1], back, prm, psitab, itab, glx, glw)
        orb[k + 1, 0] = X
        orb[k + 1, 1] = Y
    # two seeds pushed side by side; when they coincide the direction is exact
    a1 = v0[0]
    a2 = v0[1]
    b1 = v0[2]
    b2 = v0[3]
    cr = 1.0
    for j in range(n_max, 0, -1):
        _, _, j00, j01, j10, j11, _ = step(orb[j, 0], orb[j, 1], inverse, prm, psitab, itab, glx, glw)
        w1 = j00 * a1 + j01 * a2
        w2 = j10 * a1 + j11 * a2
        nr = math.sqrt(w1 * w1 + w2 * w2)
        a1 = w1 / nr
        a2 = w2 / nr
        w1 = j00 * b1 + j01 * b2
        w2 = j10 * b1 + j11 * b2
        nr = math.sqrt(w1 * w1 + w2 * w2)
        b1 = w1 / nr
        b2 = w2 / nr
    cr = abs(a1 * b2 - a2 * b1)
    _, _, j00, j01, j10, j11, _ = step(x, y, inverse, prm, psitab, itab, glx, glw)
    w1 = j00 * a1 + j01 * a2
    w2 = j10 * a1 + j11 * a2
    return a1, a2, 0.5 * math.log(w1 * w1 + w2 * w2), cr, cr < tol


@njit(cache=True, parallel=True)
def directions_many(pts, n_max, tol, seeds, inverse, prm, psitab, itab, glx, glw):
    n = pts.shape[0]
    out = np.empty((n, 2))
    logexp = np.empty(n)
    delta = np.empty(n)
    ok = np.zeros(n, dtype=np.bool_)
    for i in prange(n):
        d1, d2, le, cr, good = _direction_fast(pts[i, 0], pts[i, 1], n_max, tol, seeds,
                                                inverse, prm, psitab, itab, glx, glw)
        out[i, 0] = d1
        out[i, 1] = d2
        logexp[i] = le
        delta[i] = cr
        ok[i] = good
    return out, logexp, delta, ok


@njit(cache=True)
def newton_periodic(x, y, n, tol, max_iter, prm, psitab, itab, glx, glw):
    """Newton iteration for f^n(p) = p mod Z^2.

    Returns (x, y, residual, iterations, ok, J00, J01, J10, J11) where J is
    D f^n at the solution.
    """
    res = 1.0
    m00 = 1.0
    m01 = 0.0
    m10 = 0.0
    m11 = 1.0
    for it in range(max_iter):
        X, Y, m00, m01, m10, m11, bad = iterate_with_jacobian(x, y, n, False, prm, psitab, itab, glx, glw)
        if bad != 0:
            return x, y, 1.0, it, False, m00, m01, m10, m11
        r1 = centered(X - x)
        r2 = centered(Y - y)
        res = math.sqrt(r1 * r1 + r2 * r2)
        if res < tol:
            return x, y, res, it, True, m00, m01, m10, m11
        a00 = m00 - 1.0
        a11 = m11 - 1.0
        det = a00 * a11 - m01 * m10
        if det == 0.0:
            return x, y, res, it, False, m00, m01, m10, m11
        dx = (a11 * r1 - m01 * r2) / det
        dy = (-m10 * r1 + a00 * r2) / det
        sz = math.sqrt(dx * dx + dy * dy)
        # the point is pinned to machine precision; res is then the rounding
        # floor of f^n, which grows with |D f^n|
        if sz < 1e-14 and res < 1e-6:
            return x, y, res, it, True, m00, m01, m10, m11
        # damp large steps: the solution should stay in its basin
        if sz > 0.05:
            dx *= 0.05 / sz
            dy *= 0.05 / sz
        x = frac(x - dx)
        y = frac(y - dy)
    X, Y, m00, m01, m10, m11, bad = iterate_with_jacobian(x, y, n, False, prm, psitab, itab, glx, glw)
    r1 = centered(X - x)
    r2 = centered(Y - y)
    res = math.sqrt(r1 * r1 + r2 * r2)
    return x, y, res, max_iter, res < tol and bad == 0, m00, m01, m10, m11


@njit(cache=True, parallel=True)
def newton_many(pts, n, tol, max_iter, prm, psitab, itab, glx, glw):
    m = pts.shape[0]
    out = np.empty((m, 2))
    res = np.empty(m)
    ok = np.zeros(m, dtype=np.bool_)
    jac = np.empty((m, 2, 2))
    for i in prange(m):
        x, y, r, _, good, j00, j01, j10, j11 = newton_periodic(pts[i, 0], pts[i, 1], n, tol, max_iter,
                                                              prm, psitab, itab, glx, glw)
        out[i, 0] = x
        out[i, 1] = y
        res[i] = r
        ok[i] = good
        jac[i, 0, 0] = j00
        jac[i, 0, 1] = j01
        jac[i, 1, 0] = j10
        jac[i, 1, 1] = j11
    return out, res, ok, jac


@njit(cache=True)
def flow_many(s, sign, prm, psitab, itab):
    n = s.shape[0]
    out = np.empty((n, 2))
    A = np.empty((n, 2, 2))
    steps = np.empty(n, dtype=np.int64)
    status = np.empty(n, dtype=np.int64)
    for i in range(n):
        q1, q2, a00, a01, a10, a11, ns, st = flow_time_one(s[i, 0], s[i, 1], sign, prm, psitab, itab)
        out[i, 0] = q1
        out[i, 1] = q2
        A[i, 0, 0] = a00
        A[i, 0, 1] = a01
        A[i, 1, 0] = a10
        A[i, 1, 1] = a11
        steps[i] = ns
        status[i] = st
    return out, A, steps, status


@njit(cache=True)
def psi_eta_many(u, prm, psitab, itab):
    n = u.shape[0]
    v = np.empty(n)
    dv = np.empty(n)
    for i in range(n):
        v[i], dv[i] = psi_eta_eval(u[i], prm, psitab, itab)
    return v, dv


@njit(cache=True)
def psi0_many(u, prm, psitab):
    n = u.shape[0]
    v = np.empty(n)
    dv = np.empty(n)
    for i in range(n):
        v[i], dv[i] = psi0_eval(u[i], prm, psitab)
    return v, dv


@njit(cache=True)
def twist_profile_many(x, prm, glx, glw):
    n = x.shape[0]
    f = np.empty(n)
    df = np.empty(n)
    for i in range(n):
        f[i], df[i] = twist_profile(x[i], prm, glx, glw)
    return f, df


@njit(cache=True)
def _panel_gl(fa, fb, npan, mode, kk, prm, psitab, itab, gx, gw):
    """Integral of 1/(2 Lambda psi) along a flow line between two parameters.

    mode 0: parameter theta with u = 2 kk cosh(theta) (hyperbola s1 s2 = kk/...)
    mode 1: parameter l with u = exp(l) (trajectory on an axis)
    """
    lam = prm[P_LAM]
    tot = 0.0
    hp = (fb - fa) / npan
    for p in range(npan):
        lo = fa + p * hp
        for k in range(gx.shape[0]):
            th = lo + 0.5 * hp * (gx[k] + 1.0)
            if mode == 0:
                u = 2.0 * kk * math.cosh(th)
            else:
                u = math.exp(th)
            ps, _ = psi_eta_eval(u, prm, psitab, itab)
            tot += 0.5 * hp * gw[k] / (2.0 * lam * ps)
    return tot


@njit(cache=True)
def annulus_residence(s, prm, psitab, itab, r_in, r_out, gx, gw, npan):
    """Longest consecutive flow time spent in r_in < |s| < r_out.

    Trajectories lie on hyperbolas s1 s2 = const, and along them
    du/dt = +-2 Lambda psi(u) sqrt(u^2 - 4 s1^2 s2^2), so each passage time is
    a one-dimensional integral; the substitution u = 2|s1 s2| cosh(theta)
    removes the square-root singularity at the turning point.
    """
    n = s.shape[0]
    out = np.empty(n)
    lo2 = r_in * r_in
    hi2 = r_out * r_out
    for i in range(n):
        s1 = s[i, 0]
        s2 = s[i, 1]
        u0 = s1 * s1 + s2 * s2
        if u0 >= hi2 and s1 * s1 >= s2 * s2:
            out[i] = 0.0
            continue
        kk = abs(s1 * s2)
        inbound = s2 * s2 > s1 * s1
        if kk == 0.0:
            if s1 == 0.0:
                # straight into the fixed point along the stable axis
                a = math.log(max(lo2, 1e-300))
                b = math.log(min(u0, hi2))
                out[i] = _panel_gl(a, b, npan, 1, 0.0, prm, psitab, itab, gx, gw) if b > a else 0.0
            else:
                a = math.log(max(u0, lo2))
                b = math.log(hi2)
                out[i] = _panel_gl(a, b, npan, 1, 0.0, prm, psitab, itab, gx, gw) if b > a else 0.0
            continue
        umin = 2.0 * kk

        def th(u):
            return math.acosh(max(u / umin, 1.0))

        if not inbound:
            a = max(u0, lo2)
            out[i] = _panel_gl(th(a), th(hi2), npan, 0, kk, prm, psitab, itab, gx, gw) if hi2 > a else 0.0
            continue
        top = min(u0, hi2)
        if umin >= lo2:
            t_in = _panel_gl(0.0, th(top), npan, 0, kk, prm, psitab, itab, gx, gw)
            t_out = _panel_gl(0.0, th(hi2), npan, 0, kk, prm, psitab, itab, gx, gw)
            out[i] = t_in + t_out
        else:
            t_in = 0.0
            if top > lo2:
                t_in = _panel_gl(th(lo2), th(top), npan, 0, kk, prm, psitab, itab, gx, gw)
            t_out = _panel_gl(th(lo2), th(hi2), npan, 0, kk, prm, psitab, itab, gx, gw)
            out[i] = max(t_in, t_out)
    return out
