"""Sweep records and their CSV, JSON and gnuplot emitters."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

CSV_HEADER = ("s,t,l,delta,w,beta,alpha,eps,r0,eta,lambda_abs,lambda_abs_se,"
              "lambda_mme,lambda_mme_se,cert_pass,bound_abs,bound_mme")
CSV_FIELDS = CSV_HEADER.split(",")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "nan" if math.isnan(v) else format(v, ".12g")
    return str(v)


def _clean(v):
    """JSON-safe copy: non-finite floats become null."""
    if isinstance(v, float):
        return v if math.isfinite(v) else None
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


@dataclass
class SweepRecord:
    s: float
    t: float
    l: float | None = None
    delta: float | None = None
    w: float | None = None
    beta: float | None = None
    alpha: float | None = None
    eps: float | None = None
    r0: float | None = None
    eta: float | None = None
    lambda_abs: float = math.nan
    lambda_abs_se: float = math.nan
    lambda_mme: float = math.nan
    lambda_mme_se: float = math.nan
    cert_pass: bool = False
    bound_abs: float | None = None
    bound_mme: float | None = None
    flags: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def csv_row(self) -> str:
        return ",".join(_fmt(getattr(self, k)) for k in CSV_FIELDS)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in CSV_FIELDS}
        d["flags"] = self.flags
        d.update(self.extra)
        return _clean(d)


@dataclass
class SweepReport:
    kind: str
    config: dict
    targets: dict
    records: list = field(default_factory=list)
    ladder_flags: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def all_pass(self) -> bool:
        return all(all(r.flags.values()) for r in self.records) and all(self.ladder_flags.values())

    def failed(self) -> list[str]:
        out = [f"(s={r.s:g}, t={r.t:g}) {k}" for r in self.records for k, v in r.flags.items() if not v]
        return out + [k for k, v in self.ladder_flags.items() if not v]

    def csv_text(self) -> str:
        return "\n".join([CSV_HEADER] + [r.csv_row() for r in self.records]) + "\n"

    def to_dict(self) -> dict:
        return _clean({"kind": self.kind, "targets": self.targets, "all_pass": self.all_pass,
                       "ladder_flags": self.ladder_flags, "notes": self.notes, "config": self.config,
                       "records": [r.to_dict() for r in self.records]})

    def dat_text(self) -> str:
        lines = ["# lambda_abs lambda_mme"]
        lines += [f"{_fmt(r.lambda_abs)} {_fmt(r.lambda_mme)}" for r in self.records]
        return "\n".join(lines) + "\n"


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def emit_reports(report: SweepReport, out_dir: str | Path, stem: str | None = None) -> dict[str, Path]:
    """Write <stem>.csv, <stem>.json and <stem>.dat; returns the paths."""
    out = Path(out_dir)
    stem = stem or report.kind
    paths = {"csv": out / f"{stem}.csv", "json": out / f"{stem}.json", "dat": out / f"{stem}.dat"}
    _write(paths["csv"], report.csv_text())
    _write(paths["json"], json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    _write(paths["dat"], report.dat_text())
    return paths


def load_report(path: str | Path) -> SweepReport:
    """Rebuild a report from its JSON mirror (numeric fields and flags only)."""
    d = json.loads(Path(path).read_text())
    recs = []
    for r in d["records"]:
        base = {k: (math.nan if r.get(k) is None and k.startswith("lambda") else r.get(k)) for k in CSV_FIELDS}
        extra = {k: v for k, v in r.items() if k not in CSV_FIELDS and k != "flags"}
        recs.append(SweepRecord(**base, flags=r["flags"], extra=extra))
    return SweepReport(d["kind"], d["config"], d["targets"], recs, d["ladder_flags"], d["notes"])
