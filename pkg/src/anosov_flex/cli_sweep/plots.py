"""Matplotlib figures written next to the reports."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_sweep1(report, out: Path) -> Path:
    r = report.records
    d = np.array([x.delta for x in r])
    lam = report.targets["Lambda"]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.errorbar(d, [x.lambda_abs for x in r], yerr=[3 * x.lambda_abs_se for x in r], marker="o", label="lambda_abs")
    ax.errorbar(d, [x.lambda_mme for x in r], yerr=[3 * x.lambda_mme_se for x in r], marker="s", label="lambda_mme")
    ax.axhline(lam, color="k", lw=0.8, ls="--", label="Lambda")
    ax.set_xscale("log")
    ax.set_xlabel("delta")
    ax.set_ylabel("exponent")
    ax.legend()
    return _save(fig, out / "sweep1.png")


def plot_sweep2(report, out: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for s in sorted({x.s for x in report.records}):
        col = [x for x in report.records if x.s == s]
        eta = [x.eta for x in col]
        ax.errorbar(eta, [x.lambda_abs for x in col], yerr=[3 * x.lambda_abs_se for x in col], marker="o",
                    label=f"lambda_abs s={s:g}")
        ax.plot(eta, [x.lambda_mme for x in col], marker="s", ls=":", label=f"lambda_mme s={s:g}")
    ax.axhline(report.targets["gamma"], color="r", lw=0.8, ls="--", label="gamma")
    ax.axhline(report.targets["Lambda"], color="k", lw=0.8, ls="--", label="Lambda")
    ax.set_xscale("log")
    ax.invert_xaxis()
    ax.set_xlabel("eta")
    ax.legend(fontsize=7)
    return _save(fig, out / "sweep2.png")


def plot_region(report, out: Path) -> Path:
    lam = report.targets["Lambda"]
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    for kind, mk in (("sweep1", "o"), ("sweep2", "^")):
        pts = [x for x in report.records if x.extra.get("sweep") == kind]
        if pts:
            ax.errorbar([x.lambda_abs for x in pts], [x.lambda_mme for x in pts],
                        xerr=[3 * x.lambda_abs_se for x in pts], yerr=[3 * x.lambda_mme_se for x in pts],
                        ls="none", marker=mk, label=kind)
    ax.axvline(lam, color="k", lw=0.8)
    ax.axhline(lam, color="k", lw=0.8)
    ax.set_xlim(0, lam * 1.1)
    ax.set_xlabel("lambda_abs")
    ax.set_ylabel("lambda_mme")
    ax.legend()
    return _save(fig, out / "region.png")


def plot_pressure(curve, Lambda: float, out: Path) -> Path:
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.plot(curve.t_grid, curve.P_values, marker=".")
    ax.plot(curve.t_grid, Lambda * (1 - curve.t_grid), ls="--", lw=0.8, label="Lambda (1 - t)")
    ax.set_xlabel("t")
    ax.set_ylabel(f"P_{curve.period}(t)")
    ax.legend()
    return _save(fig, out / "pressure.png")


def plot_partition(partition, out: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 5))
    m = partition.masses
    cmap = plt.get_cmap("viridis")
    for poly, mass in zip(partition.polygons, m):
        geoms = getattr(poly, "geoms", [poly])
        for g in geoms:
            xy = np.asarray(g.exterior.coords)
            for dx in (-1, 0, 1):
                for dy in (-1, 0, 1):
                    ax.fill(xy[:, 0] + dx, xy[:, 1] + dy, color=cmap(mass / m.max()), ec="k", lw=0.2)
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_aspect("equal")
    ax.set_title(f"level {partition.level}: {partition.n_cells} cells")
    return _save(fig, out / "markov.png")
