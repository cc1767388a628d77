from __future__ import annotations

import json
import math
import subprocess
import sys

import pytest

from debiaslasso.cli import main


def _simulate(out, seed=7, p=30, n=60, s0=3, cov="circulant:0.8"):
    return main(["simulate", "--cov", cov, "--p", str(p), "--n", str(n), "--s0", str(s0), "--amp", "0.15",
                 "--sigma", "1", "--seed", str(seed), "--out", str(out)])


def test_simulate_writes_envelope(tmp_path):
    assert _simulate(tmp_path / "d") == 0
    for name in ("X.csv", "y.csv", "meta.json"):
        assert (tmp_path / "d" / name).exists()


def test_simulate_byte_identical(tmp_path):
    _simulate(tmp_path / "a")
    _simulate(tmp_path / "b")
    for name in ("X.csv", "y.csv", "meta.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_simulate_bad_sparsity_exits_2(tmp_path, capsys):
    assert _simulate(tmp_path / "d", s0=40) == 2
    err = capsys.readouterr().err
    assert err.startswith("BadSparsity:") and "s0" in err


def test_usage_errors_exit_2(capsys):
    assert main(["nonsense"]) == 2
    assert main(["experiment", "kurtosis", "--set", "bogus", "1"]) == 2
    assert "UsageError" in capsys.readouterr().err


def test_inapplicable_parameter_rejected(capsys):
    assert main(["experiment", "coverage", "--epsilon", "0.2"]) == 2
    assert "do not apply" in capsys.readouterr().err


def test_missing_dataset_exits_2(tmp_path):
    assert main(["fit", "--data", str(tmp_path / "nothing")]) == 2


def test_fit_writes_json(tmp_path):
    _simulate(tmp_path / "d")
    assert main(["fit", "--data", str(tmp_path / "d"), "--sigma", "1", "--out", str(tmp_path / "fit.json")]) == 0
    payload = json.loads((tmp_path / "fit.json").read_text())
    assert payload["p"] == 30 and payload["lambda"] > 0


def test_infer_known_omega(tmp_path):
    _simulate(tmp_path / "d")
    out = tmp_path / "inf"
    assert main(["infer", "--data", str(tmp_path / "d"), "--mode", "known-omega", "--sigma", "1",
                 "--out", str(out)]) == 0
    lines = (out / "inference.csv").read_text().splitlines()
    assert lines[0] == "coordinate,theta_hat,theta_d,lower,upper,p_value"
    assert len(lines) == 31
    meta = json.loads((out / "meta.json").read_text())
    assert meta["z_multiplier"] == 1.959964
    assert meta["mode"] == "KnownOmega"


def test_infer_nodewise_lambda_tilde_override(tmp_path):
    _simulate(tmp_path / "d", n=80)
    out = tmp_path / "inf"
    assert main(["infer", "--data", str(tmp_path / "d"), "--mode", "nodewise", "--lambda-tilde-k", "2.5",
                 "--out", str(out)]) == 0
    meta = json.loads((out / "meta.json").read_text())
    assert meta["lambda_tilde"] == pytest.approx(2.5 * math.sqrt(math.log(30) / 80))


def test_infer_split(tmp_path):
    _simulate(tmp_path / "d", n=81)
    out = tmp_path / "inf"
    assert main(["infer", "--data", str(tmp_path / "d"), "--mode", "split", "--sigma", "1", "--out", str(out)]) == 0
    meta = json.loads((out / "meta.json").read_text())
    assert meta["mode"] == "SampleSplit" and meta["n_correction"] == 40


def test_infer_bad_alpha_exits_2(tmp_path):
    _simulate(tmp_path / "d")
    assert main(["infer", "--data", str(tmp_path / "d"), "--alpha", "1.5", "--out", str(tmp_path / "x")]) == 2


SMALL = {
    "kurtosis": ["--p", "30", "--delta-grid", "0.5,1.0", "--replicates", "6", "--epsilons", "0.1,0.2"],
    "coverage": ["--n", "80", "--p", "20", "--s0", "2", "--replicates", "5"],
    "risk-curve": ["--n", "50", "--p", "60", "--s0", "3", "--replicates", "2", "--r", "0.9"],
    "two-step": ["--n", "60", "--p", "80", "--s0", "4", "--replicates", "3"],
    "denoiser-check": ["--n", "60", "--p", "30", "--s0", "3", "--replicates", "3"],
}


@pytest.mark.parametrize("kind", sorted(SMALL))
def test_experiment_rerun_from_meta_is_byte_identical(tmp_path, kind):
    first = tmp_path / "first"
    assert main(["--threads", "1", "experiment", kind, *SMALL[kind], "--out", str(first)]) == 0
    meta = json.loads((first / "meta.json").read_text())
    assert meta["kind"] == kind and "version" in meta and "seed" in meta
    again = tmp_path / "again"
    assert main(["--threads", "3", "experiment", kind, "--config", str(first / "meta.json"), "--out", str(again)]) == 0
    assert (first / "results.csv").read_bytes() == (again / "results.csv").read_bytes()


def test_kurtosis_report_has_svg_and_delta_c(tmp_path):
    out = tmp_path / "k"
    assert main(["experiment", "kurtosis", *SMALL["kurtosis"], "--out", str(out)]) == 0
    assert (out / "plot.svg").read_text().lstrip().startswith("<svg")
    meta = json.loads((out / "meta.json").read_text())
    assert set(meta["summary"]["delta_c"]) == {"0.1", "0.2"}
    assert "kurtosis" in meta["summary"]["kurtosis_estimator"]


def test_risk_curve_columns_and_r_flag(tmp_path):
    out = tmp_path / "r"
    assert main(["experiment", "risk-curve", *SMALL["risk-curve"], "--out", str(out)]) == 0
    assert (out / "results.csv").read_text().splitlines()[0] == "lambda,R_true,R_naive,R_sure"
    assert json.loads((out / "meta.json").read_text())["config"]["cov"] == "circulant:0.9"


def test_flags_override_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n": 80, "p": 20, "s0": 2, "replicates": 4}))
    out = tmp_path / "o"
    assert main(["experiment", "coverage", "--config", str(cfg), "--replicates", "3", "--out", str(out)]) == 0
    assert json.loads((out / "meta.json").read_text())["config"]["replicates"] == 3


def test_threads_env_variable(tmp_path, monkeypatch):
    monkeypatch.setenv("DEBIAS_LASSO_THREADS", "2")
    assert main(["experiment", "coverage", *SMALL["coverage"], "--out", str(tmp_path / "o")]) == 0


def test_console_entry_point_runs(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "debiaslasso.cli", "simulate", "--p", "5", "--n", "10",
                           "--s0", "9", "--out", str(tmp_path / "d")], capture_output=True, text=True)
    assert proc.returncode == 2
    assert proc.stderr.startswith("BadSparsity")
