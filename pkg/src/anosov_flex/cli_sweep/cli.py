"""Command-line entry point: ``anosov-flex <subcommand> [options]``.

Exit status is 0 when every pass flag of the run is true, 1 when some flag
is false and 2 when the configuration is rejected.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numba
import numpy as np

from ..exponents import (lyap_abs_birkhoff, lyap_mme_periodic, lyap_stable_birkhoff, periodic_set, pressure,
                         pressure_curve)
from ..hyperbolicity import certify
from ..markov import AdlerWeiss, markov_consistency, mme_strip_mass
from ..slow_down import SlowDownMap
from ..twist_map import StripRegions, TwistMap
from . import plots
from .config import ConfigError, load_config
from .report import _clean, emit_reports, load_report
from .sweeps import region_report, run_construction1_sweep, run_construction2_sweep

COMMANDS = ("certify", "lyap-abs", "lyap-mme", "pressure", "markov", "sweep1", "sweep2", "region")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="anosov-flex", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, default=None, help="JSON config (defaults embedded)")
        p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        p.add_argument("--out", type=Path, default=None, help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker processes / numba threads")
        p.add_argument("--print-config", action="store_true", help="print the effective config and exit")
        p.add_argument("--no-plots", action="store_true", help="skip the matplotlib figures")
    return ap


def _write_json(out: Path, name: str, payload: dict) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{name}.json"
    path.write_text(json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n")
    return path


def _budget_pair(cfg, handle):
    b = cfg.budgets
    if isinstance(handle, SlowDownMap):
        return b["slow_orbits"], b["slow_iters"], b["slow_periods"]
    return b["abs_orbits"], b["abs_iters"], b["twist_periods"]


def cmd_certify(cfg, out, args):
    h = cfg.single_map()
    cert = certify(h, cfg.budgets["cert_grid"], cfg.budgets["cert_margin"])
    return {"map": h.describe(), "certificate": cert.to_dict()}, {"cert_pass": cert.pass_}


def cmd_lyap_abs(cfg, out, args):
    h = cfg.single_map()
    lam, ns = cfg.M.Lambda, cfg.targets["n_sigma"]
    n_orb, n_it, _ = _budget_pair(cfg, h)
    b = cfg.budgets
    fwd = lyap_abs_birkhoff(h, n_orb, n_it, b["burn_in"], cfg.seed)
    bwd = lyap_stable_birkhoff(h, n_orbits=n_orb, n_iters=n_it, burn_in=b["burn_in"], rng_seed=cfg.seed + 1)
    flags = {"abs_le_Lambda": fwd.value <= lam + ns * fwd.std_error + 1e-9,
             "forward_backward_sum_zero": abs(fwd.value + bwd.value) <= ns * math.hypot(fwd.std_error,
                                                                                      bwd.std_error) + 1e-9}
    if getattr(h, "is_linear", False):
        flags["linear_within_2e-3"] = abs(fwd.value - lam) < 2e-3
    return {"map": h.describe(), "lambda_abs": fwd.to_dict(), "lambda_stable": bwd.to_dict()}, flags


def cmd_lyap_mme(cfg, out, args):
    h = cfg.single_map()
    lam, ns = cfg.M.Lambda, cfg.targets["n_sigma"]
    _, _, (n1, n2) = _budget_pair(cfg, h)
    steps = cfg.budgets["continuation_steps"]
    o1, o2 = periodic_set(h, n1, steps), periodic_set(h, n2, steps)
    est = lyap_mme_periodic(o1, o2)
    flags = {"complete": o1.complete and o2.complete,
             "mme_ge_Lambda": est.value >= lam - ns * est.std_error - 1e-10}
    return {"map": h.describe(), "lambda_mme": est.to_dict(), "counts": [len(o1.points), len(o2.points)]}, flags


def cmd_pressure(cfg, out, args):
    h = cfg.single_map()
    lam = cfg.M.Lambda
    n = cfg.budgets["pressure_period"] if not isinstance(h, SlowDownMap) else cfg.budgets["slow_periods"][1]
    orbits = periodic_set(h, n, cfg.budgets["continuation_steps"])
    curve = pressure_curve(orbits)
    p0, p1 = pressure(orbits, 0.0), pressure(orbits, 1.0)
    flags = {"P0_near_Lambda": abs(p0 - lam) < 2e-2, "P1_near_zero": abs(p1) < 2e-2,
             "convex": bool(np.all(curve.second_differences() >= -1e-12))}
    if not args.no_plots:
        plots.plot_pressure(curve, lam, out)
    return {"map": h.describe(), "P0": p0, "P1": p1, "curve": curve.to_dict()}, flags


def cmd_markov(cfg, out, args):
    h = cfg.single_map()
    if isinstance(h, SlowDownMap):
        raise ConfigError("markov partitions are built for linear and twist maps only")
    params = h.params.with_(w=0.0) if isinstance(h, TwistMap) else None
    builder = AdlerWeiss(cfg.M, params)
    level = cfg.budgets["markov_level"]
    part = builder.level(level)
    lam = math.exp(cfg.M.Lambda)
    flags = {"perron_root_near_e_Lambda": abs(part.perron_root - lam) < 1e-2,
             "area_sum_one": abs(part.meta["area_sum"] - 1.0) < 1e-8,
             "mass_sum_one": abs(part.meta["mass_sum"] - 1.0) < 1e-8,
             "markov_consistent": markov_consistency(builder, part, seed=cfg.seed) == 1.0}
    payload = {"map": h.describe(), "level": level, "n_rectangles": len(builder.rectangles),
               "n_symbols": len(builder.symbols), "n_cells": part.n_cells, "perron_root": part.perron_root,
               "d_s": part.d_s, "d_u": part.d_u, "meta": part.meta}
    if isinstance(h, TwistMap) and h.params.delta < h.params.l:
        Q = mme_strip_mass(part, StripRegions.of(h.params).S2_w)
        payload["Q"] = Q
        flags["Q_positive"] = Q > 0.0
    (out / "markov_partition.json").parent.mkdir(parents=True, exist_ok=True)
    (out / "markov_partition.json").write_text(part.to_json())
    if not args.no_plots:
        plots.plot_partition(part, out)
    return payload, flags


def _sweep(kind, cfg, out, args):
    run = run_construction1_sweep if kind == "sweep1" else run_construction2_sweep
    report = run(cfg, workers=max(1, args.threads))
    emit_reports(report, out)
    if not args.no_plots:
        (plots.plot_sweep1 if kind == "sweep1" else plots.plot_sweep2)(report, out)
    return report


def cmd_region(cfg, out, args):
    reports = []
    for kind in ("sweep1", "sweep2"):
        path = out / f"{kind}.json"
        reports.append(load_report(path) if path.exists() else _sweep(kind, cfg, out, args))
    report = region_report(reports)
    emit_reports(report, out)
    if not args.no_plots:
        plots.plot_region(report, out)
    return report


SINGLE = {"certify": cmd_certify, "lyap-abs": cmd_lyap_abs, "lyap-mme": cmd_lyap_mme,
          "pressure": cmd_pressure, "markov": cmd_markov}


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out"] = str(args.out)
    try:
        cfg = load_config(args.config, overrides)
        if args.print_config:
            print(cfg.to_json())
            return 0
        cfg.validate()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.threads < 1:
        print("config error: --threads must be >= 1", file=sys.stderr)
        return 2
    numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))
    out = Path(cfg.data["out"])
    t0 = time.perf_counter()
    try:
        if args.command in SINGLE:
            payload, flags = SINGLE[args.command](cfg, out, args)
            payload["flags"] = flags
            payload["all_pass"] = all(flags.values())
            _write_json(out, args.command, payload)
            ok, failed = payload["all_pass"], [k for k, v in flags.items() if not v]
        elif args.command == "region":
            rep = cmd_region(cfg, out, args)
            ok, failed = rep.all_pass, rep.failed()
        else:
            rep = _sweep(args.command, cfg, out, args)
            ok, failed = rep.all_pass, rep.failed()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    status = "PASS" if ok else "FAIL"
    print(f"{args.command}: {status} in {time.perf_counter() - t0:.1f}s -> {out}")
    for f in failed:
        print(f"  failed: {f}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
