import csv
import json

import numpy as np
import pytest
import yaml

from openulam.cli import main

BETA = {"map": {"family": "beta_shift", "params": {"beta": 5.9}}, "hole": [["5/5.9", 1.0]],
        "partition": {"kind": "uniform", "k": 500}}
TRIP = {"map": {"family": "tripling"}, "hole": [["1/3", "2/3"]], "partition": {"kind": "uniform", "k": 27}}


def write(tmp_path, data, name="c.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data))
    return str(p)


def read_json(path):
    return json.loads(path.read_text())


def test_solve_outputs(tmp_path):
    cfg = write(tmp_path, BETA)
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o"), "--matrix"]) == 0
    s = read_json(tmp_path / "o" / "summary.json")
    for key in ("rho", "gap", "iterations", "residuals", "flags", "runtime"):
        assert key in s
    assert abs(s["rho"] - 5 / 5.9) <= 1e-12
    with open(tmp_path / "o" / "solution.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x_left", "x_right", "h_value", "psi_value", "mu_cdf_at_right", "lambda_weight"]
    assert len(rows) == 501
    assert float(rows[-1][4]) == pytest.approx(1.0, abs=1e-12)
    assert len(rows[1][3].replace("0.", "").lstrip("0")) <= 18
    assert (tmp_path / "o" / "matrix.coo").exists()


def test_reproducible_byte_identical(tmp_path):
    cfg = write(tmp_path, BETA)
    for d in ("a", "b"):
        assert main(["solve", "--config", cfg, "--out", str(tmp_path / d), "--reproducible"]) == 0
    for f in ("solution.csv", "summary.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    assert read_json(tmp_path / "a" / "summary.json")["runtime"] is None


def test_out_env(tmp_path, monkeypatch):
    monkeypatch.setenv("OPENULAM_OUT", str(tmp_path / "envout"))
    assert main(["solve", "--config", write(tmp_path, TRIP)]) == 0
    assert (tmp_path / "envout" / "summary.json").exists()


def test_nonconvergence_exit(tmp_path):
    cfg = write(tmp_path, dict(BETA, hole=[[0.9001, 1.0]], solver={"tol": 1e-14, "max_iter": 3}))
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    err = read_json(tmp_path / "o" / "error.json")
    assert err["error"] == "NonConvergenceError" and err["iterations"] == 3


def test_bad_config_exit(tmp_path, capsys):
    cfg = write(tmp_path, {"map": {"family": "beta_shift", "params": {"beta": 5.9}}, "partition": {"k": -3}})
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "partition.k" in capsys.readouterr().err
    assert main(["solve", "--config", str(tmp_path / "missing.yaml"), "--out", str(tmp_path / "o")]) == 2


def test_converge_markov_exact(tmp_path):
    cfg = write(tmp_path, dict(TRIP, converge={"k_list": [3, 9, 27, 81]}))
    assert main(["converge", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    rep = read_json(tmp_path / "o" / "converge.json")
    assert rep["reference_kind"] == "exact"
    assert max(rep["errors"]) <= 1e-12
    data = np.loadtxt(tmp_path / "o" / "converge.csv", delimiter=",", skiprows=1, usecols=range(6))
    assert data.shape == (4, 6)


def test_converge_surrogate_reference(tmp_path):
    cfg = write(tmp_path, dict(BETA, hole=[[0.3, 0.35]], converge={"k_list": [250, 500, 1000, 2000]}))
    assert main(["converge", "--config", cfg, "--out", str(tmp_path / "o"), "--workers", "2"]) == 0
    rep = read_json(tmp_path / "o" / "converge.json")
    assert rep["reference_kind"] == "largest_k"
    assert len(rep["errors"]) == 3


def test_scan_one_cell_matches_solve(tmp_path):
    lor = {"map": {"family": "lorenz", "params": {"c": 2.01, "alpha": 0.95}},
           "partition": {"kind": "uniform", "k": 400},
           "scan": {"c_range": [2.01, 2.01], "alpha_range": [0.95, 0.95], "grid": [1, 1], "k": 400}}
    cfg = write(tmp_path, lor)
    assert main(["scan", "--config", cfg, "--out", str(tmp_path / "s")]) == 0
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "v")]) == 0
    with open(tmp_path / "s" / "scan.csv") as fh:
        row = list(csv.DictReader(fh))[0]
    assert float(row["rho"]) == read_json(tmp_path / "v" / "summary.json")["rho"]


def test_scan_workers_deterministic(tmp_path):
    lor = {"map": {"family": "lorenz", "params": {"c": 2.1, "alpha": 0.7}},
           "scan": {"c_range": [2.01, 2.3], "alpha_range": [0.5, 0.9], "grid": [3, 2], "k": 200}}
    cfg = write(tmp_path, lor)
    assert main(["scan", "--config", cfg, "--out", str(tmp_path / "a"), "--reproducible"]) == 0
    assert main(["scan", "--config", cfg, "--out", str(tmp_path / "b"), "--workers", "3", "--reproducible"]) == 0
    assert (tmp_path / "a" / "scan.csv").read_bytes() == (tmp_path / "b" / "scan.csv").read_bytes()
    assert (tmp_path / "a" / "scan.json").read_bytes() == (tmp_path / "b" / "scan.json").read_bytes()


def test_scan_requires_lorenz(tmp_path):
    assert main(["scan", "--config", write(tmp_path, BETA), "--out", str(tmp_path / "o")]) == 2


def test_admissible_bahsoun(tmp_path):
    for n, verdict in [(1, "unknown"), (2, "ulam_admissible_certified")]:
        cfg = write(tmp_path, {"map": {"family": "bahsoun"}, "admissible": {"epsilon": 0.1, "power": n}})
        assert main(["admissible", "--config", cfg, "--out", str(tmp_path / f"o{n}")]) == 0
        assert read_json(tmp_path / f"o{n}" / "admissible.json")["verdict"] == verdict


def test_admissible_lorenz(tmp_path):
    cfg = write(tmp_path, {"map": {"family": "lorenz", "params": {"c": 2.05, "alpha": 0.6}}})
    assert main(["admissible", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    rep = read_json(tmp_path / "o" / "admissible.json")
    assert rep["verdict"] == "admissible_via_criterion"
    assert 0 < rep["inner_fixed_point"] < 1


def test_enlarge(tmp_path):
    cfg = write(tmp_path, dict(TRIP, enlarge={"m": 1}))
    assert main(["enlarge", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    rep = read_json(tmp_path / "o" / "enlarge.json")
    assert rep["rho_difference"] <= 1e-12


def test_oracle(tmp_path):
    cfg = write(tmp_path, dict(TRIP, oracle={"N": 200000, "n_max": 40, "seed": 3, "accim_n": 5}))
    assert main(["oracle", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    rep = read_json(tmp_path / "o" / "oracle.json")
    assert rep["agree_within_3ci95"]
    assert (tmp_path / "o" / "survival.csv").exists() and (tmp_path / "o" / "histogram.csv").exists()


def test_module_entry_point(tmp_path):
    import subprocess
    import sys

    cfg = write(tmp_path, TRIP)
    out = subprocess.run([sys.executable, "-m", "openulam", "solve", "--config", cfg, "--out", str(tmp_path / "o")],
                         capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
