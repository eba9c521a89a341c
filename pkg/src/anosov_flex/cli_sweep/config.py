"""Sweep configuration: one JSON document with every default embedded.

Ladders are given as fractions so the document stays valid when l or r0
change: ``delta_fracs`` multiply l, ``eta_fracs`` multiply r0^2.  The
s-coordinate of a slow-down column is a position on the delta ladder
(0 = first rung, 1 = last rung).
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import AnosovError
from ..torus_core import HyperbolicMatrix
from ..twist_map import LinearMap, TwistMap, TwistParams, default_twist_params


class ConfigError(ValueError):
    """An invalid configuration, reported before any numerics run."""


DEFAULTS: dict = {
    "matrix": [2, 1, 1, 1],
    "construction1": {
        "m": 0.375,
        "l": 0.25,
        "delta_fracs": [1.0, 0.25, 0.0625],
        "w_frac": 0.125,
        "beta": None,
    },
    "construction2": {
        "alpha": 0.25,
        "eps": 0.02,
        "r0": 0.125,
        "eta_fracs": [2.0, 1.0, 0.25, 0.0625, 0.015625],
        "s_values": [0.0, 1.0],
    },
    "budgets": {
        "abs_orbits": 200,
        "abs_iters": 100000,
        "burn_in": 1000,
        "slow_orbits": 64,
        "slow_iters": 20000,
        "twist_periods": [7, 8],
        "slow_periods": [6, 7],
        "continuation_steps": 20,
        "pressure_period": 8,
        "cert_grid": 256,
        "cert_margin": 1e-3,
        "markov_level": 4,
        "markov_cap": 12,
        "residence_samples": 10000,
    },
    "targets": {
        "gamma_over_Lambda": 0.25,
        "S_minus_Lambda": 0.1,
        "T": 1.0,
        "H": 1.0,
        "sigma": 0.0,
        "C_tilde": 0.0,
        "n_sigma": 3.0,
    },
    "map": {"kind": "twist", "delta_frac": 0.0625, "s": 1.0, "eta_frac": 2.0},
    "seed": 0,
    "out": "out",
}


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigError(f"unknown config key {path + k!r}")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"{path + k!r} must be an object")
            out[k] = _merge(base[k], v, path + k + ".")
        else:
            out[k] = v
    return out


@dataclass
class SweepConfig:
    data: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    # -------------------------------------------------------- accessors
    @property
    def M(self) -> HyperbolicMatrix:
        return HyperbolicMatrix(*self.data["matrix"])

    @property
    def c1(self) -> dict:
        return self.data["construction1"]

    @property
    def c2(self) -> dict:
        return self.data["construction2"]

    @property
    def budgets(self) -> dict:
        return self.data["budgets"]

    @property
    def targets(self) -> dict:
        return self.data["targets"]

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    def resolved_targets(self) -> dict:
        lam = self.M.Lambda
        t = self.targets
        return {"Lambda": lam, "gamma": t["gamma_over_Lambda"] * lam, "S": lam + t["S_minus_Lambda"],
                "T": t["T"], "H": t["H"], "H_floor": t["H"] + t["C_tilde"] * t["sigma"],
                "n_sigma": t["n_sigma"]}

    def twist_params(self, delta_frac: float) -> TwistParams:
        c = self.c1
        return default_twist_params(self.M, delta_frac, m=c["m"], l=c["l"], beta=c["beta"], w_frac=c["w_frac"])

    def s_positions(self) -> list[float]:
        n = len(self.c1["delta_fracs"])
        return [k / (n - 1) if n > 1 else 0.0 for k in range(n)]

    def delta_frac_at(self, s: float) -> float:
        pos = self.s_positions()
        for k, p in enumerate(pos):
            if abs(p - s) < 1e-12:
                return self.c1["delta_fracs"][k]
        raise ConfigError(f"s={s} is not a rung of the delta ladder (positions {pos})")

    def base_map(self, s: float):
        frac = self.delta_frac_at(s)
        if frac == 1.0:
            return LinearMap(self.M)
        return TwistMap(self.M, self.twist_params(frac))

    def slow_params(self, eta_frac: float, s: float = 0.0):
        from ..slow_down import SlowDownParams

        c = self.c2
        return SlowDownParams(alpha=c["alpha"], eps=c["eps"], r0=c["r0"], eta=eta_frac * c["r0"] ** 2, s=s)

    def t_positions(self) -> list[float]:
        n = len(self.c2["eta_fracs"])
        return [k / (n - 1) if n > 1 else 0.0 for k in range(n)]

    def single_map(self):
        """The map named by the "map" section, for the single-map subcommands."""
        from ..slow_down import SlowDownMap

        spec = self.data["map"]
        kind = spec["kind"]
        if kind == "linear":
            return LinearMap(self.M)
        if kind == "twist":
            return TwistMap(self.M, self.twist_params(spec["delta_frac"]))
        if kind == "slowdown":
            return SlowDownMap(self.base_map(spec["s"]), self.slow_params(spec["eta_frac"], spec["s"]))
        raise ConfigError(f"map.kind must be linear, twist or slowdown, got {kind!r}")

    # -------------------------------------------------------- validation
    def validate(self) -> None:
        """Build every grid point's parameters; the first violation aborts."""
        from ..slow_down import SlowDownMap

        try:
            M = self.M
            for frac in self.c1["delta_fracs"]:
                self.twist_params(frac).check_against(M)
            fr = self.c1["delta_fracs"]
            if any(b >= a for a, b in zip(fr, fr[1:])):
                raise ConfigError("delta_fracs must be strictly decreasing")
            ef = self.c2["eta_fracs"]
            if any(b >= a for a, b in zip(ef, ef[1:])):
                raise ConfigError("eta_fracs must be strictly decreasing")
            for s in self.c2["s_values"]:
                base = self.base_map(s)
                for e in ef:
                    SlowDownMap(base, self.slow_params(e, s))
            self.single_map()
        except ConfigError:
            raise
        except (AnosovError, TypeError, KeyError) as exc:
            raise ConfigError(f"invalid grid point: {exc}") from exc
        b = self.budgets
        for k in ("abs_orbits", "abs_iters", "slow_orbits", "slow_iters", "cert_grid"):
            if int(b[k]) < 1:
                raise ConfigError(f"budgets.{k} must be >= 1")
        for key in ("twist_periods", "slow_periods"):
            p = b[key]
            if len(p) != 2 or p[1] != p[0] + 1 or p[0] < 1:
                raise ConfigError(f"budgets.{key} must be two consecutive periods, got {p}")
        t = self.resolved_targets()
        if not t["S"] > t["Lambda"]:
            raise ConfigError("need S > Lambda")
        if not all(math.isfinite(v) for v in t.values()):
            raise ConfigError("targets must be finite")

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True)


def default_config() -> SweepConfig:
    return SweepConfig()


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> SweepConfig:
    data = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            user = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
        data = _merge(data, user)
    if overrides:
        data = _merge(data, overrides)
    return SweepConfig(data)
