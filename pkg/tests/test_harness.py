import json
import os
import subprocess
import sys

import numpy as np
import pytest

from gdmc.harness import (
    ExperimentConfig,
    cmd_fig1,
    cmd_fig2,
    cmd_fig3,
    cmd_fig4,
    cmd_run,
    cmd_validate,
    check_operator_symmetry,
    fig3_measure_iteration,
    make_config,
    read_config_file,
    run_fig3_sweep,
    write_csv,
)


def read_csv(path):
    with open(path) as f:
        comment = f.readline()
        header = f.readline().strip().split(",")
    data = np.genfromtxt(path, delimiter=",", skip_header=2)
    return comment, header, np.atleast_2d(data)


def test_make_config_precedence(tmp_path):
    cfg_file = tmp_path / "exp.cfg"
    cfg_file.write_text("n = 300\np = 0.25  # comment\neta=0.05\n")
    cfg = make_config(
        "fig2", read_config_file(cfg_file), {"p": 0.4, "trials": None}
    )
    assert cfg.n == 300  # from file
    assert cfg.p == 0.4  # CLI override wins
    assert cfg.eta == 0.05
    assert cfg.sigma == pytest.approx(0.1 / 300)  # auto resolves against n
    assert cfg.beta0 == (pytest.approx(1 / 300),)


def test_config_file_rejects_garbage(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("this is not a key value line\n")
    with pytest.raises(ValueError):
        read_config_file(bad)
    with pytest.raises(TypeError):
        make_config("fig2", {"unknown_key": "1"})


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(trials=0)
    with pytest.raises(ValueError):
        ExperimentConfig(beta0=(), eigenvalues=(1.0,))
    with pytest.raises(ValueError):
        ExperimentConfig(eigenvalues=(1.0, 0.5), T="auto", beta0=(0.01,))


def test_config_hash_sensitivity():
    a = make_config("fig2", overrides={"n": 100})
    b = make_config("fig2", overrides={"n": 100})
    c = make_config("fig2", overrides={"n": 101})
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != c.config_hash()


def test_write_csv_roundtrip(tmp_path):
    path = tmp_path / "x.csv"
    vals = np.array([0.1, 1.0 / 3.0, 1e-300, np.nan])
    write_csv(path, [("t", np.arange(4)), ("v", vals)], "abc123")
    comment, header, data = read_csv(path)
    assert comment == "# config_hash=abc123\n"
    assert header == ["t", "v"]
    np.testing.assert_array_equal(data[:3, 1], vals[:3])  # exact round trip
    assert np.isnan(data[3, 1])


def test_fig1_outputs_and_consistency(tmp_path):
    cfg = make_config("fig1", overrides={"n": 300, "T": 400, "base_seed": 3})
    paths = cmd_fig1(cfg, tmp_path)
    assert {os.path.basename(p) for p in paths} == {
        "fig1_recursion.csv",
        "fig1_trajectory.csv",
        "fig1_manifest.json",
    }
    _, hdr_r, rec = read_csv(tmp_path / "fig1_recursion.csv")
    _, hdr_t, vec = read_csv(tmp_path / "fig1_trajectory.csv")
    assert hdr_r == ["t", "alpha", "beta", "gamma"]
    assert hdr_t == ["t", "alpha", "beta", "gamma", "signal", "orth"]
    # recursion and full-vector series agree
    for k in (1, 2, 3):
        assert np.max(np.abs(rec[:, k] - vec[:, k])) <= 1e-10
    # norm is non-decreasing once the signal dominates the orthogonal part
    alpha, beta, gamma = vec[:, 1], vec[:, 2], vec[:, 3]
    t0 = int(np.argmax(alpha >= gamma))
    assert np.all(np.diff(beta[t0:]) >= -1e-12)
    # saturation at sqrt(lam)
    assert beta[-1] == pytest.approx(1.0, abs=1e-2)


def test_fig2_outputs_and_degenerate_deviation(tmp_path):
    cfg = make_config(
        "fig2",
        overrides={"n": 120, "p": 1.0, "sigma": 0.0, "T": 80, "loo": "0,60"},
    )
    paths = cmd_fig2(cfg, tmp_path)
    names = {os.path.basename(p) for p in paths}
    assert {
        "fig2_series.csv",
        "fig2_phase.json",
        "fig2_spectral.json",
        "fig2_manifest.json",
    } <= names
    _, header, data = read_csv(tmp_path / "fig2_series.csv")
    for col in ("alpha", "beta", "aligned_l2", "dev_ref_l2", "dev_ref_inf",
                "x_inf", "dev_loo_0", "dev_loo_60"):
        assert col in header
    # fully observed, noiseless: reference deviation is identically zero
    dev = data[:, header.index("dev_ref_l2")]
    assert np.max(dev) <= 1e-12
    phase = json.loads((tmp_path / "fig2_phase.json").read_text())
    assert phase["t_star_pred"] > 0
    spectral = json.loads((tmp_path / "fig2_spectral.json").read_text())
    assert spectral["h_norm"] <= 1e-6  # no sampling error at p=1, sigma=0


def test_fig3_single_trial_deterministic(tmp_path):
    over = {"n": 60, "trials": 1, "beta0": "1e-2,1e-4", "p_grid": "0.3,0.5"}
    cfg = make_config("fig3", overrides=over)
    rows1 = run_fig3_sweep(cfg)
    rows2 = run_fig3_sweep(cfg)
    assert rows1 == rows2
    assert len(rows1) == 4
    cmd_fig3(cfg, tmp_path)
    _, header, data = read_csv(tmp_path / "fig3_sweep.csv")
    assert header == ["beta0", "p", "trials", "failures", "mean", "median", "std"]
    assert data.shape == (4, 7)


def test_fig3_parallel_jobs_match_serial():
    over = {"n": 50, "trials": 3, "beta0": "1e-3", "p_grid": "0.4"}
    serial = run_fig3_sweep(make_config("fig3", overrides=over))
    parallel = run_fig3_sweep(make_config("fig3", overrides={**over, "jobs": 2}))
    assert serial == parallel


def test_fig3_measure_iteration_formula():
    # the measurement time follows the stated closed form with natural log
    t = fig3_measure_iteration(1.0, 500, 1e-6, 0.1)
    direct = int(round(np.log(np.sqrt(500) / 1e-6) / np.log(1.1))) + 100
    assert t == direct


def test_fig4_rank3_and_rank1_columns(tmp_path):
    cfg = make_config(
        "fig4", overrides={"n": 80, "T": 150, "sigma": 0.0, "base_seed": 1}
    )
    cmd_fig4(cfg, tmp_path)
    _, header, data = read_csv(tmp_path / "fig4_series.csv")
    for col in ("sigma1", "sigma2", "sigma3", "procrustes", "dev_ref_rot"):
        assert col in header
    out1 = tmp_path / "r1"
    cfg1 = make_config(
        "fig4",
        overrides={"n": 80, "T": 100, "eigenvalues": "1.0", "sigma": 0.0},
    )
    cmd_fig4(cfg1, out1)
    _, header1, _ = read_csv(out1 / "fig4_series.csv")
    for col in ("alpha", "beta", "aligned_l2", "dev_ref_l2", "x_inf"):
        assert col in header1


def test_fig4_noise_scaling_of_aligned_floor(tmp_path):
    base = {"n": 120, "T": 260, "eigenvalues": "1.0,0.75,0.5", "p": 0.5,
            "base_seed": 9}
    floors = []
    for k, sigma in enumerate((0.02, 0.04)):
        out = tmp_path / f"s{k}"
        cfg = make_config("fig4", overrides={**base, "sigma": sigma})
        cmd_fig4(cfg, out)
        _, header, data = read_csv(out / "fig4_series.csv")
        floors.append(np.median(data[-30:, header.index("procrustes")]))
    assert 1.3 <= floors[1] / floors[0] <= 3.0


def test_cmd_run_rank1_and_rank_r(tmp_path):
    cfg = make_config(
        "run",
        overrides={"n": 90, "p": 0.5, "sigma": 0.001, "T": 60, "beta0": "0.01"},
    )
    paths = cmd_run(cfg, tmp_path)
    names = {os.path.basename(p) for p in paths}
    assert {"run_series.csv", "run_trajectory.json", "run_phase.json",
            "run_spectral.json", "run_manifest.json"} == names
    traj = json.loads((tmp_path / "run_trajectory.json").read_text())
    assert traj["T"] == 60 and traj["diverged_at"] is None
    assert traj["snapshot_iterations"][0] == 0
    out2 = tmp_path / "rr"
    cfg2 = make_config(
        "run",
        overrides={"n": 40, "p": 0.6, "sigma": 0.0, "T": 40,
                   "eigenvalues": "1.0,0.5", "beta0": "0.01", "loo": "none"},
    )
    names2 = {os.path.basename(p) for p in cmd_run(cfg2, out2)}
    assert "run_phase.json" not in names2  # phase boundaries are rank-1 only
    manifest = json.loads((tmp_path / "run_manifest.json").read_text())
    assert manifest["config_hash"] == cfg.config_hash()
    assert "seeds" in manifest


def test_validate_all_pass_and_negative_control(tmp_path):
    rows, ok = cmd_validate(tmp_path)
    assert ok and all(r["passed"] for r in rows)
    report = json.loads((tmp_path / "validate.json").read_text())
    assert report["passed"]
    ids = [r["id"] for r in rows]
    assert "operator_symmetry" in ids and "oracle_products" in ids
    # negative control: a corrupted operator matrix fails the named check
    bad = np.eye(6)
    bad[0, 5] = 1e-3
    passed, detail = check_operator_symmetry(matrix=bad)
    assert not passed and "A^T" in detail


def test_cli_end_to_end(tmp_path):
    env = dict(os.environ, GDMC_OUT=str(tmp_path / "envout"))
    run = subprocess.run(
        [sys.executable, "-m", "gdmc.cli", "fig1", "--n", "150", "--T", "100"],
        capture_output=True,
        text=True,
        env=env,
    )
    assert run.returncode == 0
    assert (tmp_path / "envout" / "fig1_recursion.csv").exists()
    check = subprocess.run(
        [sys.executable, "-m", "gdmc.cli", "validate"],
        capture_output=True,
        text=True,
    )
    assert check.returncode == 0
    assert "PASS oracle_products" in check.stdout


def test_cli_config_file_and_flag_precedence(tmp_path):
    cfgf = tmp_path / "exp.cfg"
    cfgf.write_text("n = 90\nT = 50\nsigma = 0\np = 0.6\n")
    out = tmp_path / "o"
    run = subprocess.run(
        [sys.executable, "-m", "gdmc.cli", "fig2", "--config", str(cfgf),
         "--loo", "none", "--no-spectral", "--out", str(out)],
        capture_output=True,
        text=True,
    )
    assert run.returncode == 0, run.stderr
    manifest = json.loads((out / "fig2_manifest.json").read_text())
    assert manifest["config"]["n"] == "90"
    assert manifest["config"]["loo"] == "none"
