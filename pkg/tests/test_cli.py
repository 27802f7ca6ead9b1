import csv
import json

import numpy as np
import pytest

from pathsens import cli


def _run(tmp_path, *args):
    code = cli.main(list(args) + ["--out", str(tmp_path)])
    return code


def _report(tmp_path, name):
    return json.loads((tmp_path / f"{name}_report.json").read_text())


def test_schlogl_run_writes_reports(tmp_path):
    code = _run(tmp_path, "schlogl", "--horizon", "20000", "--horizon-unit", "jumps", "--seed", "3")
    assert code == cli.EXIT_OK
    rep = _report(tmp_path, "schlogl")
    assert rep["config"]["seed"] == 3
    assert len(rep["rer"]) == 8
    assert rep["fim"]["k"] == 4 and len(rep["fim"]["matrix"]) == 16
    assert {"exact", "quadratic_from_exact_fim"} <= set(rep["rer"][0])
    assert rep["fim"]["design"]["determinant"] > 0
    header = next(csv.reader(open(tmp_path / "schlogl_rer_trace.csv")))
    assert header[0] == "clock" and len(header) == 9
    assert (tmp_path / "schlogl_stationary.csv").exists()


def test_report_replay_reproduces(tmp_path):
    first = tmp_path / "a"
    second = tmp_path / "b"
    assert _run(first, "schlogl", "--horizon", "5000", "--directions", "0.05,0,0,0") == 0
    rep1 = _report(first, "schlogl")
    assert _run(second, "schlogl", "--config", str(first / "schlogl_report.json")) == 0
    rep2 = _report(second, "schlogl")
    assert rep1["rer"][0]["estimate"] == rep2["rer"][0]["estimate"]
    assert rep1["fim"]["matrix"] == rep2["fim"]["matrix"]


def test_yaml_config_and_flag_precedence(tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("params: {k1A: 3.0, k2: 1.0, k3B: 2.0, k4: 3.5}\nhorizon: 3000\nseed: 5\n"
                   "settings: {omega: 15}\n")
    out = tmp_path / "o"
    assert _run(out, "schlogl", "--config", str(cfg), "--seed", "9", "--directions", "none") == 0
    rep = _report(out, "schlogl")
    assert rep["config"]["seed"] == 9
    assert rep["config"]["horizon"] == 3000
    assert rep["rer"] == []


def test_workers_merge_in_replica_order(tmp_path):
    args = ["schlogl", "--horizon", "4000", "--replicas", "3", "--directions", "0,0.05,0,0"]
    assert _run(tmp_path / "s", *args) == 0
    assert _run(tmp_path / "p", *args, "--workers", "2") == 0
    a, b = _report(tmp_path / "s", "schlogl"), _report(tmp_path / "p", "schlogl")
    assert a["rer"][0]["estimate"] == b["rer"][0]["estimate"]
    assert len(a["rer_replicas"]["values"]) == 3


@pytest.mark.parametrize("args", [
    ["schlogl", "--model", "zgb"],
    ["schlogl", "--params", "1,2,3"],
    ["schlogl", "--params", "k1A=3,k2=1,k3B=2,bogus=1"],
    ["schlogl", "--directions", "0,-5,0,0"],
    ["schlogl", "--horizon", "-1"],
    ["langevin", "--estimator", "h1"],
    ["zgb", "--params", "1.5,0.85"],
    ["schlogl", "--set", "omega"],
])
def test_config_errors_exit_2(tmp_path, args):
    assert _run(tmp_path, *args) == cli.EXIT_CONFIG


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("horizn: 10\n")
    assert _run(tmp_path, "schlogl", "--config", str(cfg)) == cli.EXIT_CONFIG


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert cli.main(["exact", "--directions", "none"]) == 0
    assert (tmp_path / "env" / "exact_report.json").exists()


def test_exact_schlogl_and_verify(tmp_path):
    assert _run(tmp_path, "exact", "--set", "verify=3") == 0
    rep = _report(tmp_path, "exact")
    assert rep["verify"]["residual"] < 1e-12
    assert len(rep["stationary"]["modes"]) == 2
    assert rep["rer"][0]["exact"] > 0


def test_exact_finite_matrix(tmp_path):
    (tmp_path / "P.txt").write_text("0.9 0.1\n0.3 0.7\n")
    (tmp_path / "Pe.txt").write_text("0.8 0.2\n0.3 0.7\n")
    code = _run(tmp_path, "exact", "--model", "finite", "--set", f"matrix={tmp_path / 'P.txt'}",
                "--set", f"matrix_eps={tmp_path / 'Pe.txt'}")
    assert code == 0
    rep = _report(tmp_path, "exact")
    np.testing.assert_allclose(rep["stationary"], [0.75, 0.25])
    assert rep["rer"] > 0


def test_langevin_small_run(tmp_path):
    assert _run(tmp_path, "langevin", "--horizon", "5", "--burn-in", "1", "--set", "alpha=0.1") == 0
    rep = _report(tmp_path, "langevin")
    assert rep["config"]["settings"]["alpha"] == 0.1
    assert len(rep["fim"]["eigen"]["eigenvalues"]) == 3
    assert rep["level_sets"]


def test_zgb_small_run_with_phase_diagram_and_snapshots(tmp_path):
    code = _run(tmp_path, "zgb", "--horizon", "1", "--burn-in", "0.5", "--set", "size=16", "--set", "snapshots=true",
                "--set", "phase_diagram={k1: [0.3, 0.4, 2], k2: [0.8, 0.9, 2], horizon: 0.5, burn_in: 0.1}")
    assert code == 0
    rep = _report(tmp_path, "zgb")
    assert rep["fim"]["offdiagonal_max_abs"] == 0.0
    assert rep["phase_diagram"]["points"] == 4
    rows = list(csv.DictReader(open(tmp_path / "zgb_phase_diagram.csv")))
    assert len(rows) == 4
    assert set(rep["snapshots"]) == {"unperturbed", "k1_perturbed", "k2_perturbed"}
    assert np.loadtxt(tmp_path / "zgb_snapshot_unperturbed.txt").shape == (16, 16)


def test_log_scale_report(tmp_path):
    assert _run(tmp_path, "exact", "--log-scale") == 0
    rep = _report(tmp_path, "exact")
    F = np.array(rep["fim"]["matrix"]).reshape(4, 4)
    Fl = np.array(rep["fim"]["log_scale"]["matrix"]).reshape(4, 4)
    th = np.array(rep["config"]["params"])
    np.testing.assert_allclose(Fl, np.outer(th, th) * F, rtol=1e-15)


def test_module_entry_point_help(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--help"])
    assert exc.value.code == 0
    assert "schlogl" in capsys.readouterr().out
