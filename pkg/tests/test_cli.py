import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from confstat import cli
from confstat.parallel import ENV_WORKERS, default_workers, map_chunks
from confstat.report import AnalysisReport


def _run(argv, tmp_path, capsys, name="report.json"):
    out = tmp_path / name
    code = cli.main([*argv, "--out", str(out)])
    text = capsys.readouterr().out
    report = AnalysisReport.load(out) if code == 0 else None
    return code, report, text


def test_analyze_flrw(tmp_path, capsys):
    code, rep, text = _run(["analyze", "--model", "flrw_flat", "--param", "H=0.1", "--region", "t=0:1", "--grid", "3"], tmp_path, capsys)
    assert code == 0
    st = rep.verdicts["stationarity"]
    assert st["verdict"] == "conformally_stationary"
    assert rep.evidence["decomposition_residual_max"] < 1e-8
    assert rep.verdicts["expansion_rotation"]["verdict"] == "evaluated"
    assert "stationarity: conformally_stationary" in text
    assert rep.config["region"]["lo"][0] == 0.0 and rep.config["grid"] == 3
    assert rep.files["events"].endswith("report_events.csv")
    with open(rep.files["events"]) as fh:
        rows = list(csv.reader(fh))
    assert rows[0][:4] == ["x0", "x1", "x2", "x3"] and len(rows) == 82
    assert "ln_f" in rows[0]


def test_analyze_bianchi_and_minkowski(tmp_path, capsys):
    code, rep, _ = _run(["analyze", "--model", "bianchi_I", "--grid", "3"], tmp_path, capsys)
    assert code == 0
    st = rep.verdicts["stationarity"]
    assert st["verdict"] == "not_stationary" and st["shear_sup"] > 0.1
    assert st["conformal_residual_sup"] is None
    code, rep, _ = _run(["analyze", "--model", "minkowski_static", "--grid", "2"], tmp_path, capsys, "m.json")
    assert rep.verdicts["stationarity"]["verdict"] == "conformally_stationary"
    assert rep.evidence["f_min"] == rep.evidence["f_max"] == 1.0


def test_trace_flrw_pair(tmp_path, capsys):
    code, rep, _ = _run(["trace", "--model", "flrw_flat"], tmp_path, capsys)
    assert code == 0
    red = rep.verdicts["redshift"]
    assert red["verdict"] == "consistent"
    assert abs(red["r_integral"] - red["r_potential"]) < 1e-6
    assert red["z"] == pytest.approx(np.expm1(red["r_integral"]), rel=1e-12)
    assert rep.verdicts["conformal_frequency"]["verdict"] == "conserved"
    assert abs(rep.evidence["message_c_minus_exp_r"]) < 1e-8
    assert "trajectory" in rep.tables


def test_trace_minkowski_and_bianchi(tmp_path, capsys):
    code, rep, _ = _run(["trace", "--model", "minkowski_static", "--no-message"], tmp_path, capsys)
    assert code == 0 and rep.verdicts["redshift"]["z"] == 0.0
    assert "message" not in rep.evidence
    code, rep, _ = _run(
        ["trace", "--model", "bianchi_I", "--x0", "0,0,0,0", "--K0", "0,1,0,0", "--no-message"], tmp_path, capsys, "b.json"
    )
    cf = rep.verdicts["conformal_frequency"]
    assert cf["verdict"] == "not_conserved" and cf["drift"] > 1e-3 and not cf["candidate_certified"]


def test_parallax_and_causality(tmp_path, capsys):
    code, rep, _ = _run(["parallax", "--model", "flrw_flat", "--taus", "0,0.5,1"], tmp_path, capsys)
    assert code == 0
    assert rep.verdicts["parallax"]["verdict"] == "parallax_free"
    assert rep.verdicts["parallax"]["angle_drift"] < 1e-6
    assert rep.evidence["g_KP_drift_max"] < 1e-8 and rep.evidence["v_min"] > 0
    code, rep, _ = _run(["causality", "--model", "flrw_flat", "--grid", "3"], tmp_path, capsys, "c.json")
    c = rep.verdicts["causality"]
    assert c["stably_causal"] and c["margin_min"] == pytest.approx(0.01, abs=1e-9)
    code, rep, _ = _run(["causality", "--model", "minkowski_static", "--grid", "2"], tmp_path, capsys, "d.json")
    assert rep.verdicts["causality"]["verdict"] == "criteria_not_met"


def test_potential(tmp_path, capsys):
    code, rep, text = _run(["potential", "--model", "flrw_flat", "--anchor", "0,0,0,0", "--target", "2,0,0,0"], tmp_path, capsys)
    assert code == 0
    assert rep.evidence["ln_f"] == pytest.approx(0.2, abs=1e-12)
    assert rep.verdicts["potential"]["verdict"] == "path_independent"
    assert "ln_f = 0.2" in text


def test_config_file_and_overrides(tmp_path, capsys):
    cfg = {
        "command": "analyze",
        "model": {"family": "flrw_flat", "params": {"H": 0.2}},
        "grid": 2,
        "tolerances": {"stationarity": 1e-5},
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    code, rep, _ = _run(["potential", "--config", str(path), "--param", "H=0.1", "--tol", "quad=1e-13"], tmp_path, capsys)
    assert code == 0
    assert rep.command == "potential"
    assert rep.config["model"]["params"] == {"H": 0.1}
    assert rep.tolerances["stationarity"] == 1e-5 and rep.tolerances["quad"] == 1e-13
    # switching family drops the old family's parameters
    code, rep, _ = _run(["analyze", "--config", str(path), "--model", "bianchi_I"], tmp_path, capsys, "b.json")
    assert rep.config["model"]["params"] == {"h1": 1.0, "h2": 0.0, "h3": 0.0}


@pytest.mark.parametrize(
    "argv,code",
    [
        (["analyze", "--model", "flrw_flat", "--tol", "bogus=1"], 2),
        (["analyze", "--model", "flrw_flat", "--grid", "1"], 2),
        (["analyze", "--model", "nope"], 2),
        (["analyze"], 2),
        (["analyze", "--model", "flrw_flat", "--param", "H"], 2),
        (["analyze", "--model", "flrw_flat", "--region", "q=0:1"], 2),
        (["analyze", "--model", "flrw_flat", "--region", "t=1:0"], 2),
        (["trace", "--model", "flrw_flat", "--x0", "0,0,0"], 2),
        (["trace", "--model", "flrw_flat", "--x0", "0,0,0,0"], 2),
        (["analyze", "--model", "flrw_flat", "--region", "t=30:40", "--grid", "2"], 3),
        (["trace", "--model", "flrw_flat", "--tol", "shoot_max_iter=1"], 4),
        (["trace", "--model", "flrw_flat", "--x0", "0,0,0,0", "--K0", "0,1,0,0", "--tol", "null=1e-20"], 4),
    ],
)
def test_exit_codes(argv, code, capsys):
    assert cli.main(argv) == code
    err = capsys.readouterr().err
    assert err
    if code == 3:
        assert "at event [30.0" in err


def test_bad_config_file(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert cli.main(["analyze", "--config", str(p)]) == 2
    p.write_text(json.dumps({"model": {"family": "flrw_flat"}, "grid": "five"}))
    assert cli.main(["analyze", "--config", str(p)]) == 2
    assert "grid" in capsys.readouterr().err


def test_workers_do_not_change_results(tmp_path, capsys, monkeypatch):
    base = ["analyze", "--model", "goedel", "--grid", "5"]
    _, one, _ = _run([*base, "--workers", "1"], tmp_path, capsys, "w1.json")
    monkeypatch.setenv(ENV_WORKERS, "3")
    _, many, _ = _run(base, tmp_path, capsys, "w3.json")
    assert many.config["workers"] == 3 and one.config["workers"] == 1
    a = np.array(one.tables["events"]["rows"], dtype=float)
    b = np.array(many.tables["events"]["rows"], dtype=float)
    assert a.shape == (625, b.shape[1])
    assert np.max(np.abs(a - b)) < 1e-12
    assert one.verdicts == many.verdicts


def test_default_workers_env(monkeypatch):
    monkeypatch.delenv(ENV_WORKERS, raising=False)
    assert default_workers() == 1
    monkeypatch.setenv(ENV_WORKERS, "4")
    assert default_workers() == 4
    monkeypatch.setenv(ENV_WORKERS, "many")
    assert default_workers() == 1


def test_map_chunks_preserves_order():
    pts = np.arange(40.0).reshape(10, 4)
    out = map_chunks(lambda p: {"s": p.sum(axis=1)}, pts, workers=3, chunk=3)
    assert np.array_equal(out["s"], pts.sum(axis=1))


def test_module_entry_point(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "confstat", "potential", "--model", "minkowski_static"],
        capture_output=True,
        text=True,
        cwd=tmp_path,
    )
    assert out.returncode == 0
    assert "ln_f = 0" in out.stdout
