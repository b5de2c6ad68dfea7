import csv
import io
import json
import math

import pytest

from betajacobi import harness
from betajacobi.errors import NumericError
from betajacobi.harness import (
    REPORT_COLUMNS,
    ConfigError,
    ExperimentConfig,
    ReportRow,
    VerificationReport,
    report_render,
    run,
)


def rows_of(report):
    return {r.name: r for r in report.rows}


def test_zeros_example():
    rep = run(ExperimentConfig.from_dict({"kind": "zeros", "N": 2, "alpha": 0, "beta": 0}))
    assert rep.passed
    r = rows_of(rep)
    assert r["z_1"].estimate == pytest.approx(-1 / math.sqrt(3))
    assert r["z_2"].estimate == pytest.approx(1 / math.sqrt(3))
    assert r["stieltjes_N2_a0_b0"].estimate <= 1e-9
    assert rep.artifacts["zeros.csv"].splitlines()[0] == "index,z,residual"


def test_small_martingale_run_passes():
    cfg = ExperimentConfig.from_dict(
        {"kind": "martingale", "N": 2, "kappa": 2, "p": 4, "q": 4, "M": 2000, "t_grid": [0.1, 0.2], "seed": 5}
    )
    rep = run(cfg)
    assert rep.passed, rep.failures()
    names = [r.name for r in rep.rows]
    assert "k2_mart_q2" in names and "k2_charpoly_y0.5" in names
    assert all(r.t != 0 for r in rep.rows if r.role == "stat")


def test_charpoly_kind_with_k_parameters():
    cfg = ExperimentConfig.from_dict(
        {"kind": "charpoly", "N": 2, "k1": 0.5, "k2": 1, "k3": 2, "M": 1000, "t_grid": [0.1], "start": "equispaced"}
    )
    rep = run(cfg)
    assert not any("mart_q" in r.name for r in rep.rows)
    assert rep.passed, rep.failures()


def test_coeffs_compare_printed_rows():
    rep = run(ExperimentConfig.from_dict({"kind": "coeffs", "N": 2, "p": 3, "q": 3, "compare_printed": True}))
    r = rows_of(rep)
    assert r["c_2_2_printed_vs_canonical"].estimate == pytest.approx(-3 / 5)
    assert r["c_2_2_printed_vs_canonical"].predicted == pytest.approx(1 / 5)
    assert rep.passed  # info rows never fail


def test_stat_row_rules():
    ok = harness._stat_row("a", 1.0, 0.1, 0.05, 0.0, 3.0)
    assert ok.zscore == pytest.approx(2.0) and ok.passed
    bad = harness._stat_row("a", 1.0, 0.2, 0.05, 0.0, 3.0)
    assert not bad.passed
    floored = harness._stat_row("a", 1.0, 0.2, 0.05, 0.0, 3.0, floor=0.25)
    assert floored.passed
    exact = harness._stat_row("a", 1.0, 1.0, 0.0, 1.0, 3.0)
    assert exact.zscore == 0.0 and exact.passed
    det = harness._det_row("d", 1e-8, 0.0, 1e-9)
    assert not det.passed
    bound = ReportRow("b", None, 0.1, None, 0.2, None, "bound")
    assert bound.passed


def make_report(rows=()):
    return VerificationReport("zeros", list(rows), {"kind": "zeros", "seed": 0, "tol_det": 1e-9})


def test_render_header_only():
    assert report_render(make_report(), "csv") == b"name,t,estimate,stderr,predicted,zscore\n"


def test_render_column_order_and_determinism():
    rows = [
        harness._stat_row("x", 0.5, 0.1, 0.05, 0.0, 3.0),
        harness._det_row("y", 1e-12, 0.0, 1e-9),
        ReportRow("z", None, float("nan"), None, None, None, "info"),
    ]
    a = report_render(make_report(rows), "csv")
    b = report_render(make_report(rows), "csv")
    assert a == b
    parsed = list(csv.reader(io.StringIO(a.decode())))
    assert tuple(parsed[0]) == REPORT_COLUMNS
    assert parsed[1] == ["x", "0.5", "0.1", "0.05", "0.0", "2.0"]
    assert parsed[2][3] == "" and parsed[2][5] == ""


def test_json_round_trip():
    rows = [harness._stat_row("x", 0.5, 0.1, 0.05, 0.0, 3.0), ReportRow("z", None, float("inf"), None, None, None, "info")]
    text = report_render(make_report(rows), "json")
    doc = json.loads(text)
    assert (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode() == text
    assert doc["summary"]["pass"] is True and "wall_time" not in doc["summary"]
    assert doc["config"]["seed"] == 0 and doc["config"]["tol_det"] == 1e-9
    assert doc["rows"][1]["estimate"] == "inf"


def test_render_rejects_format():
    with pytest.raises(ValueError):
        report_render(make_report(), "xml")


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"kind": "nope"})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"N": 2})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"kind": "zeros", "N": 2, "bogus": 1})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"kind": "martingale", "N": 2, "p": 4})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"kind": "stationary", "N": 2, "k1": 1})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"kind": "zeros", "N": 2})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"kind": "coeffs", "N": 2})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"kind": "ode", "kappa": 2})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"kind": "zeros", "seed": -1})
    assert math.isinf(ExperimentConfig.from_dict({"kind": "ode", "kappa": "inf"}).kappa)


def test_run_maps_domain_problems_to_config_errors():
    cfg = ExperimentConfig.from_dict({"kind": "martingale", "N": 2, "kappa": 2, "p": 1.2, "q": 4, "M": 10})
    with pytest.raises(ConfigError):
        run(cfg)
    cfg = ExperimentConfig.from_dict({"kind": "martingale", "N": 2, "kappa": 2, "p": 4, "q": 4, "M": 10, "start": [0.1, 0.1]})
    with pytest.raises(ConfigError):
        run(cfg)


def test_numeric_breakdown_is_reported(monkeypatch):
    def broken(*a, **k):
        raise NumericError("no convergence", {"where": "test"})

    monkeypatch.setattr(harness, "jacobi_zeros", broken)
    rep = run(ExperimentConfig.from_dict({"kind": "zeros", "N": 3, "alpha": 0, "beta": 0}))
    assert rep.numeric_error and not rep.passed


def test_workers_not_echoed_and_output_files(tmp_path):
    base = {"kind": "martingale", "N": 2, "kappa": 2, "p": 4, "q": 4, "M": 300, "t_grid": [0.1], "seed": 3}
    a = run(ExperimentConfig.from_dict(base), tmp_path / "a")
    b = run(ExperimentConfig.from_dict({**base, "workers": 2}), tmp_path / "b", "csv")
    assert "workers" not in a.config
    for name in ("report.csv", "moments_k2.csv", "trajectories_k2.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert report_render(a, "json") == report_render(b, "json")


def test_load(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"kind": "zeros", "N": 3, "alpha": 1, "beta": 2}))
    assert ExperimentConfig.load(path).N == 3
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(path)
