"""Twist sweeps along the delta ladder and slow-down sweeps along the eta ladder.

Grid points run in a spawn-context process pool when more than one worker is
requested; every point derives its own seed from (config seed, grid key), and
results are reduced in grid order, so the CSV does not depend on the worker
count.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from multiprocessing import get_context

import numpy as np

from ..exponents import (abs_floor, lyap_abs_birkhoff, lyap_mme_periodic, lyap_stable_birkhoff, mme_lower_bound,
                         periodic_set, periodic_sets_along_eta)
from ..hyperbolicity import certify
from ..markov import AdlerWeiss, cells_inside, first_level_inside, mme_strip_mass
from ..slow_down import SlowDownMap
from ..twist_map import StripRegions, TwistMap
from .config import SweepConfig
from .report import SweepRecord, SweepReport


def point_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=tuple(key)).generate_state(1)[0])


def _init_worker():
    import numba

    numba.set_num_threads(1)


def _run(tasks, workers: int):
    """Apply each (fn, args) task; order of results follows the task list."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(*args) for fn, args in tasks]
    with ProcessPoolExecutor(max_workers=workers, mp_context=get_context("spawn"),
                             initializer=_init_worker) as pool:
        futs = [pool.submit(fn, *args) for fn, args in tasks]
        return [f.result() for f in futs]


# rounding allowance: a constant cocycle summed 1e5 times drifts by ~1e-12
ROUND = 1e-9


def _tol(n_sigma: float, *se: float) -> float:
    return n_sigma * math.sqrt(sum(x * x for x in se))


# ------------------------------------------------------------ delta ladder


def sweep1_flags(r: SweepRecord, tg: dict) -> dict:
    """Pass flags of one delta-ladder record, from its numeric fields."""
    lam, ns = tg["Lambda"], tg["n_sigma"]
    f = {
        "cert_pass": bool(r.cert_pass),
        "abs_le_Lambda": r.lambda_abs <= lam + _tol(ns, r.lambda_abs_se) + ROUND,
        "abs_above_Lambda_minus_gamma": r.lambda_abs > lam - tg["gamma"],
        "abs_ge_floor": r.lambda_abs >= r.bound_abs - _tol(ns, r.lambda_abs_se),
        "mme_ge_bound": r.bound_mme is None or r.bound_mme <= r.lambda_mme + _tol(ns, r.lambda_mme_se),
    }
    if r.s > 0.0:
        f["abs_strictly_below_Lambda"] = lam - r.lambda_abs > _tol(ns, r.lambda_abs_se)
        f["mme_strictly_above_Lambda"] = r.lambda_mme - lam > _tol(ns, r.lambda_mme_se)
        f["strip_cell_found"] = r.bound_mme is not None and r.extra.get("Q", 0.0) > 0.0
    else:
        f["linear_corner"] = (abs(r.lambda_abs - lam) <= _tol(ns, r.lambda_abs_se) + ROUND
                              and abs(r.lambda_mme - lam) <= _tol(ns, r.lambda_mme_se) + ROUND)
    if r.s == 1.0:
        f["mme_above_H"] = r.lambda_mme - _tol(ns, r.lambda_mme_se) > tg["H"]
    return f


def strip_mass(M, p, level: int, cap: int) -> dict:
    """Q from the Markov partition of the piecewise-linear map with the same (m, l, delta, beta)."""
    t0 = time.perf_counter()
    builder = AdlerWeiss(M, p.with_(w=0.0))
    strip = StripRegions.of(p).S2_w
    n0, _ = first_level_inside(builder, strip, cap)
    if n0 is None:
        return {"Q": 0.0, "first_level": None, "level": None, "seconds": time.perf_counter() - t0}
    level = max(n0, level)
    part = builder.level(level)
    return {"Q": mme_strip_mass(part, strip), "first_level": n0, "level": level,
            "cells_inside": int(cells_inside(part, strip).sum()), "n_cells": part.n_cells,
            "perron_root": part.perron_root, "seconds": time.perf_counter() - t0}


def _sweep1_point(data: dict, k: int) -> SweepRecord:
    cfg = SweepConfig(data)
    M, b = cfg.M, cfg.budgets
    frac = cfg.c1["delta_fracs"][k]
    p = cfg.twist_params(frac)
    h = TwistMap(M, p)
    s = cfg.s_positions()[k]
    timing = {}

    t0 = time.perf_counter()
    cert = certify(h, b["cert_grid"], b["cert_margin"])
    timing["cert"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    est = lyap_abs_birkhoff(h, b["abs_orbits"], b["abs_iters"], b["burn_in"], point_seed(cfg.seed, 1, k))
    timing["abs"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    n1, n2 = b["twist_periods"]
    o1 = periodic_set(h, n1, b["continuation_steps"])
    o2 = periodic_set(h, n2, b["continuation_steps"])
    mme = lyap_mme_periodic(o1, o2)
    timing["mme"] = time.perf_counter() - t0

    markov = strip_mass(M, p, b["markov_level"], b["markov_cap"])
    timing["markov"] = markov.pop("seconds")
    Q = markov["Q"]
    rec = SweepRecord(
        s=s, t=0.0, l=p.l, delta=p.delta, w=p.w, beta=p.beta,
        lambda_abs=est.value, lambda_abs_se=est.std_error, lambda_mme=mme.value, lambda_mme_se=mme.std_error,
        cert_pass=cert.pass_, bound_abs=abs_floor(M, p), bound_mme=mme_lower_bound(M, p, Q) if Q > 0 else None,
        extra={"Q": Q, "markov": markov, "certificate": cert.to_dict(), "seconds": timing,
               "periods": [n1, n2], "is_linear_model": frac == 1.0},
    )
    return rec


def run_construction1_sweep(cfg: SweepConfig, workers: int = 1) -> SweepReport:
    cfg.validate()
    tg = cfg.resolved_targets()
    tasks = [(_sweep1_point, (cfg.data, k)) for k in range(len(cfg.c1["delta_fracs"]))]
    records = _run(tasks, workers)
    for r in records:
        r.flags = sweep1_flags(r, tg)
    report = SweepReport("sweep1", cfg.data, tg, records)
    report.ladder_flags = sweep1_ladder_flags(records, tg)
    jumps = [abs(b.lambda_mme - a.lambda_mme) for a, b in zip(records, records[1:])]
    report.notes.append(f"largest per-step lambda_mme jump {max(jumps, default=0.0):.4g}")
    return report


def sweep1_ladder_flags(records, tg: dict) -> dict:
    ns = tg["n_sigma"]
    ok = all(b.lambda_mme - a.lambda_mme > -_tol(ns, a.lambda_mme_se, b.lambda_mme_se)
             for a, b in zip(records, records[1:]))
    return {"mme_increasing_as_delta_decreases": ok}


# ------------------------------------------------------------ eta ladder


def _sweep2_column(data: dict, s: float):
    """Base certificate and the MME estimates of one eta column."""
    cfg = SweepConfig(data)
    b = cfg.budgets
    base = cfg.base_map(s)
    params = [cfg.slow_params(e, s) for e in cfg.c2["eta_fracs"]]
    t0 = time.perf_counter()
    base_cert = certify(base, b["cert_grid"], b["cert_margin"])
    t_cert = time.perf_counter() - t0
    t0 = time.perf_counter()
    n1, n2 = b["slow_periods"]
    steps = b["continuation_steps"]
    sets1 = periodic_sets_along_eta(base, params, n1, steps)
    sets2 = periodic_sets_along_eta(base, params, n2, steps)
    mmes = [lyap_mme_periodic(a, c) for a, c in zip(sets1, sets2)]
    return base_cert, t_cert, mmes, time.perf_counter() - t0


def _sweep2_point(data: dict, s: float, k: int, base_cert) -> dict:
    cfg = SweepConfig(data)
    b = cfg.budgets
    sp = cfg.slow_params(cfg.c2["eta_fracs"][k], s)
    g = SlowDownMap(cfg.base_map(s), sp)
    si = cfg.c2["s_values"].index(s)
    t0 = time.perf_counter()
    cert = certify(g, b["cert_grid"], b["cert_margin"], base_certificate=base_cert)
    t_cert = time.perf_counter() - t0
    t0 = time.perf_counter()
    fwd = lyap_abs_birkhoff(g, b["slow_orbits"], b["slow_iters"], b["burn_in"], point_seed(cfg.seed, 2, si, k))
    bwd = lyap_stable_birkhoff(g, n_orbits=b["slow_orbits"], n_iters=b["slow_iters"], burn_in=b["burn_in"],
                               rng_seed=point_seed(cfg.seed, 3, si, k))
    return {"cert": cert, "cert_seconds": t_cert, "fwd": fwd, "bwd": bwd,
            "abs_seconds": time.perf_counter() - t0}


def sweep2_flags(r: SweepRecord, tg: dict, s_max: float) -> dict:
    lam, ns = tg["Lambda"], tg["n_sigma"]
    ls, ls_se = r.extra["lambda_stable"], r.extra["lambda_stable_se"]
    f = {
        "cert_pass": bool(r.cert_pass),
        "abs_le_Lambda": r.lambda_abs <= lam + _tol(ns, r.lambda_abs_se) + ROUND,
        "forward_backward_sum_zero": abs(r.lambda_abs + ls) <= _tol(ns, r.lambda_abs_se, ls_se) + ROUND,
    }
    if r.s == 0.0:
        f["mme_below_S"] = r.lambda_mme - _tol(ns, r.lambda_mme_se) < tg["S"]
    if r.s == s_max and s_max > 0.0:
        f["mme_above_T"] = r.lambda_mme + _tol(ns, r.lambda_mme_se) > tg["T"]
        f["mme_above_H_floor"] = r.lambda_mme + _tol(ns, r.lambda_mme_se) >= tg["H_floor"]
    if r.t == 1.0:
        f["abs_below_gamma"] = r.lambda_abs - _tol(ns, r.lambda_abs_se) < tg["gamma"]
    return f


def sweep2_ladder_flags(records, tg: dict) -> dict:
    ns = tg["n_sigma"]
    out = {}
    for s in sorted({r.s for r in records}):
        col = [r for r in records if r.s == s]
        out[f"abs_decreasing_s={s:g}"] = all(
            b.lambda_abs - a.lambda_abs < _tol(ns, a.lambda_abs_se, b.lambda_abs_se) for a, b in zip(col, col[1:]))
    return out


def run_construction2_sweep(cfg: SweepConfig, workers: int = 1) -> SweepReport:
    cfg.validate()
    tg = cfg.resolved_targets()
    s_values = list(cfg.c2["s_values"])
    cols = _run([(_sweep2_column, (cfg.data, s)) for s in s_values], workers)
    tasks = [(_sweep2_point, (cfg.data, s, k, cols[i][0]))
             for i, s in enumerate(s_values) for k in range(len(cfg.c2["eta_fracs"]))]
    points = iter(_run(tasks, workers))
    tpos = cfg.t_positions()
    records = []
    for i, s in enumerate(s_values):
        base_cert, t_base, mmes, t_mme = cols[i]
        base = cfg.base_map(s)
        for k, frac in enumerate(cfg.c2["eta_fracs"]):
            pt = next(points)
            sp = cfg.slow_params(frac, s)
            bp = getattr(base, "params", None)
            rec = SweepRecord(
                s=s, t=tpos[k], l=bp.l if bp else None, delta=bp.delta if bp else None,
                w=bp.w if bp else None, beta=bp.beta if bp else None, alpha=sp.alpha, eps=sp.eps,
                r0=sp.r0, eta=sp.eta, lambda_abs=pt["fwd"].value, lambda_abs_se=pt["fwd"].std_error,
                lambda_mme=mmes[k].value, lambda_mme_se=mmes[k].std_error, cert_pass=pt["cert"].pass_,
                extra={"lambda_stable": pt["bwd"].value, "lambda_stable_se": pt["bwd"].std_error,
                       "certificate": pt["cert"].to_dict(), "periods": list(cfg.budgets["slow_periods"]),
                       "seconds": {"cert": pt["cert_seconds"] + (t_base if k == 0 else 0.0),
                                   "abs": pt["abs_seconds"], "mme": t_mme if k == 0 else 0.0},
                       "is_linear_model": bp is None and frac >= 2.0},
            )
            records.append(rec)
    s_max = max(s_values)
    for r in records:
        r.flags = sweep2_flags(r, tg, s_max)
    report = SweepReport("sweep2", cfg.data, tg, records)
    report.ladder_flags = sweep2_ladder_flags(records, tg)
    report.notes.append("mme_above_H_floor is checked as lambda_mme >= H + C_tilde sigma with the configured C_tilde")
    return report


# ------------------------------------------------------------ region


def region_flags(r: SweepRecord, tg: dict) -> dict:
    lam, ns = tg["Lambda"], tg["n_sigma"]
    inside = (r.lambda_abs <= lam + _tol(ns, r.lambda_abs_se) + ROUND
              and r.lambda_mme >= lam - _tol(ns, r.lambda_mme_se) - ROUND)
    at_corner = (abs(r.lambda_abs - lam) <= _tol(ns, r.lambda_abs_se) + ROUND
                 and abs(r.lambda_mme - lam) <= _tol(ns, r.lambda_mme_se) + ROUND)
    return {"in_region": inside, "corner_only_linear": (not at_corner) or bool(r.extra.get("is_linear_model"))}


def region_report(reports: list[SweepReport]) -> SweepReport:
    """All records of the given sweeps, flagged against {lambda_abs <= Lambda <= lambda_mme}."""
    tg = reports[0].targets
    records = []
    for rep in reports:
        for r in rep.records:
            rr = SweepRecord(**{k: getattr(r, k) for k in (
                "s", "t", "l", "delta", "w", "beta", "alpha", "eps", "r0", "eta", "lambda_abs",
                "lambda_abs_se", "lambda_mme", "lambda_mme_se", "cert_pass", "bound_abs", "bound_mme")},
                extra={"sweep": rep.kind, "is_linear_model": r.extra.get("is_linear_model", False)})
            rr.flags = region_flags(rr, tg)
            records.append(rr)
    return SweepReport("region", reports[0].config, tg, records)
