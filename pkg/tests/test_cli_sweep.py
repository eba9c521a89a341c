import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from anosov_flex.cli_sweep import (CSV_HEADER, ConfigError, SweepRecord, SweepReport, default_config, emit_reports,
                                   load_config)
from anosov_flex.cli_sweep.cli import main
from anosov_flex.cli_sweep.report import _fmt, load_report
from anosov_flex.cli_sweep.sweeps import sweep1_flags

HEADER = "s,t,l,delta,w,beta,alpha,eps,r0,eta,lambda_abs,lambda_abs_se,lambda_mme,lambda_mme_se,cert_pass,bound_abs,bound_mme"

SMALL = {
    "construction1": {"delta_fracs": [1.0, 0.25]},
    "budgets": {"abs_orbits": 8, "abs_iters": 2000, "burn_in": 100, "twist_periods": [5, 6],
                "continuation_steps": 8, "markov_level": 3, "cert_grid": 256},
}


def _write_cfg(tmp_path, data):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(data))
    return p


def test_header_is_exact():
    assert CSV_HEADER == HEADER


def test_empty_report_is_header_only(tmp_path):
    rep = SweepReport("sweep1", {}, {})
    assert rep.csv_text() == HEADER + "\n"
    paths = emit_reports(rep, tmp_path)
    assert paths["csv"].read_text() == HEADER + "\n"
    assert json.loads(paths["json"].read_text())["records"] == []
    assert rep.all_pass


def test_fmt_rules():
    assert _fmt(None) == "" and _fmt(True) == "true" and _fmt(False) == "false"
    assert _fmt(0.1) == "0.1" and _fmt(math.nan) == "nan"


def test_print_config(capsys):
    assert main(["sweep1", "--print-config", "--seed", "7"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["seed"] == 7
    assert data["construction2"]["eta_fracs"] == default_config().c2["eta_fracs"]


@pytest.mark.parametrize("bad, needle", [
    ({"construction1": {"beta": 1.2}}, "beta"),
    ({"construction1": {"delta_fracs": [1.0, 1.0]}}, "decreasing"),
    ({"construction2": {"alpha": 0.5}}, "alpha"),
    ({"budgets": {"twist_periods": [5, 7]}}, "consecutive"),
    ({"targets": {"S_minus_Lambda": -0.1}}, "S > Lambda"),
    ({"no_such_key": 1}, "no_such_key"),
])
def test_config_errors_exit_2(tmp_path, capsys, bad, needle):
    assert main(["certify", "--config", str(_write_cfg(tmp_path, bad)), "--out", str(tmp_path)]) == 2
    assert needle in capsys.readouterr().err


def test_load_config_rejects_bad_json(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)


def test_small_sweep1_end_to_end(tmp_path):
    out = tmp_path / "o"
    rc = main(["sweep1", "--config", str(_write_cfg(tmp_path, SMALL)), "--out", str(out), "--no-plots"])
    lines = (out / "sweep1.csv").read_text().splitlines()
    assert lines[0] == HEADER and len(lines) == 3
    rep = load_report(out / "sweep1.json")
    lin, tw = rep.records
    assert lin.lambda_abs == pytest.approx(0.9624236501, abs=1e-8)
    assert lin.lambda_mme == pytest.approx(0.9624236501, abs=1e-10)
    assert tw.lambda_abs < lin.lambda_abs < tw.lambda_mme
    # flags are a pure function of the numeric fields
    for r in rep.records:
        assert sweep1_flags(r, rep.targets) == r.flags
    assert rc == (0 if rep.all_pass else 1)
    assert len((out / "sweep1.dat").read_text().splitlines()) == 3


def test_single_map_commands(tmp_path):
    out = tmp_path / "lin"
    cfg = _write_cfg(tmp_path, {"map": {"kind": "linear"}, "budgets": {"abs_orbits": 4, "abs_iters": 1000}})
    assert main(["lyap-abs", "--config", str(cfg), "--out", str(out), "--no-plots"]) == 0
    d = json.loads((out / "lyap-abs.json").read_text())
    assert d["all_pass"] and d["flags"]["linear_within_2e-3"]
    assert main(["pressure", "--config", str(cfg), "--out", str(out), "--no-plots"]) == 0
    assert main(["markov", "--config", str(cfg), "--out", str(out), "--no-plots"]) == 0
    assert json.loads((out / "markov.json").read_text())["n_symbols"] == 5


@given(st.floats(0.5, 1.5), st.floats(0.0, 0.01), st.floats(0.5, 1.5), st.floats(0.0, 0.01))
def test_sweep1_flags_consistent(la, sa, lm, sm):
    tg = default_config().resolved_targets()
    r = SweepRecord(s=0.5, t=0.0, lambda_abs=la, lambda_abs_se=sa, lambda_mme=lm, lambda_mme_se=sm,
                    cert_pass=True, bound_abs=0.0, bound_mme=None, extra={"Q": 0.1})
    f = sweep1_flags(r, tg)
    lam = tg["Lambda"]
    if f["abs_strictly_below_Lambda"]:
        assert la < lam
    if f["mme_strictly_above_Lambda"]:
        assert lm > lam
    assert f["strip_cell_found"] is False
