"""CLI surfaces, Monte Carlo engine reproducibility, baseline estimator."""

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

import blockqmle.montecarlo as mc
from blockqmle.baseline import realized_cov_previous_tick
from blockqmle.errors import DataError
from blockqmle.estimate import estimate_pipeline
from blockqmle.montecarlo import RunConfig, run_montecarlo
from blockqmle.simulate import (
    NoiseConfig,
    ObservationSet,
    PathConfig,
    observe,
    read_csv,
    simulate_latent_path,
    simulate_observations,
)

SMALL = {
    "model": "constant",
    "path": {"sigma": [1.0, 0.8660254037844386, 0.5], "T": 1.0, "fine_grid_points": 5000},
    "sampling": {"n": 400, "lambda1": 1.0, "lambda2": 1.0},
    "noise": {"kind": "gaussian", "v": [0.001, 0.001]},
    "blocks": "auto",
    "replications": 3,
    "master_seed": 11,
    "workers": 1,
}


class TestBaseline:
    def test_constant_second_component(self):
        t = np.linspace(0, 1, 50)
        obs = ObservationSet(times=(t, t), values=(np.sin(t), np.full(50, 2.0)), T=1.0)
        assert realized_cov_previous_tick(obs) == 0.0

    def test_consistency_without_noise(self):
        # synchronized noiseless sampling recovers the true covariation
        errs = []
        for seed in range(50):
            path = simulate_latent_path(PathConfig(fine_grid_points=20_000), (5, seed))
            t = np.linspace(0, 1, 5001)
            obs = observe(path, (t, t), NoiseConfig(v=(0.0, 0.0)), (6, seed))
            errs.append(realized_cov_previous_tick(obs) - 0.5)
        assert abs(np.median(errs)) < 0.05

    def test_noise_inflates_estimate(self):
        rng = np.random.default_rng(3)
        t = np.sort(rng.uniform(0, 1, 3000))
        t[0] = 0.0
        vals = []
        for n_pts in (500, 3000):
            tt = t[:n_pts]
            obs = ObservationSet(
                times=(tt, tt),
                values=(rng.normal(0, 0.1, n_pts), rng.normal(0, 0.1, n_pts)),
                T=1.0,
            )
            vals.append(abs(realized_cov_previous_tick(obs)))
        assert vals[1] > 0  # spurious nonzero value under pure noise


class TestRunConfig:
    def test_round_trip_through_dict(self):
        cfg = RunConfig.from_dict(json.loads(json.dumps(SMALL)))
        assert cfg.sampling.n == 400
        assert cfg.blocks is None
        d = cfg.to_dict()
        cfg2 = RunConfig.from_dict(d)
        assert cfg2.sampling.n == cfg.sampling.n
        assert cfg2.path.sigma == cfg.path.sigma

    def test_table_example_config_loads(self):
        from pathlib import Path

        cfg_path = Path(__file__).resolve().parent.parent / "configs" / "table1_n5000.json"
        cfg = RunConfig.from_json(str(cfg_path))
        assert cfg.sampling.n == 5000
        assert cfg.replications == 300
        np.testing.assert_allclose(cfg.noise.v, [0.001, 0.001])


class TestMonteCarlo:
    def test_single_replication_matches_pipeline(self):
        cfg = RunConfig.from_dict(dict(SMALL, replications=1))
        table = run_montecarlo(cfg)
        rows = {(r[0], r[1]): r[2] for r in table.rows}
        obs, _ = simulate_observations(
            cfg.path, cfg.sampling, cfg.noise,
            np.random.SeedSequence((cfg.master_seed, 0)),
        )
        rep = estimate_pipeline(obs, cfg.make_model(), block_cfg=cfg.block_config())
        assert rows[("plugin", "sigma1")] == pytest.approx(rep.sigma_hat[0], rel=1e-12)
        assert rows[("raw", "v1")] == pytest.approx(rep.v_hat[0], rel=1e-12)
        assert rows[("qcov_mle", "value")] == pytest.approx(rep.qcov, rel=1e-12)

    def test_worker_count_does_not_change_output(self, tmp_path):
        cfg1 = RunConfig.from_dict(SMALL)
        cfg2 = RunConfig.from_dict(dict(SMALL, workers=2))
        t1 = run_montecarlo(cfg1)
        t2 = run_montecarlo(cfg2)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        t1.write_csv(str(p1))
        t2.write_csv(str(p2))
        assert p1.read_bytes() == p2.read_bytes()

    def test_replication_streams_differ(self):
        cfg = RunConfig.from_dict(dict(SMALL, replications=4))
        table = run_montecarlo(cfg)
        assert table.completed == 4
        # distinct seeds give distinct estimates
        sd_rows = [r for r in table.rows if r[0] == "plugin" and r[1] == "sigma1"]
        assert sd_rows[0][3] > 0

    def test_replication_streams_uncorrelated(self):
        # spot check: latent draws from consecutive replication seeds do
        # not share randomness
        cfg = RunConfig.from_dict(SMALL)
        draws = []
        for r in range(2):
            obs, _ = simulate_observations(
                cfg.path, cfg.sampling, cfg.noise,
                np.random.SeedSequence((cfg.master_seed, r)),
            )
            draws.append(np.diff(obs.values[0]))
        m = min(len(draws[0]), len(draws[1]))
        corr = np.corrcoef(draws[0][:m], draws[1][:m])[0, 1]
        assert abs(corr) < 5.0 / np.sqrt(m)

    def test_failure_isolation(self, monkeypatch):
        real = mc.run_replication

        def flaky(cfg, rep_index):
            if rep_index == 1:
                raise RuntimeError("synthetic failure")
            return real(cfg, rep_index)

        monkeypatch.setattr(mc, "run_replication", flaky)
        cfg = RunConfig.from_dict(dict(SMALL, replications=3))
        messages = []
        table = run_montecarlo(cfg, log=messages.append)
        assert table.completed == 2
        assert len(table.failures) == 1
        assert table.failures[0][0] == 1
        assert "synthetic failure" in messages[0]

    def test_oracle_and_baseline_rows(self):
        cfg = RunConfig.from_dict(dict(SMALL, replications=2, oracle=True, baseline=True))
        table = run_montecarlo(cfg)
        ests = {r[0] for r in table.rows}
        assert {"raw", "plugin", "oracle", "qcov_mle", "qcov_rc", "theory"} <= ests

    def test_csv_schema(self, tmp_path):
        cfg = RunConfig.from_dict(dict(SMALL, replications=2))
        table = run_montecarlo(cfg)
        p = tmp_path / "mc.csv"
        table.write_csv(str(p))
        with open(p) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["estimator", "coord", "mean", "sd", "n", "reps"]
        assert rows[-1][0] == "_meta"


def run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "blockqmle.cli", *args],
        capture_output=True, text=True, check=False,
    )


class TestCli:
    def test_simulate_estimate_round_trip(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(SMALL))
        out = tmp_path / "obs.csv"
        res = run_cli("simulate", "--config", str(cfg_path), "--seed", "3",
                      "--out", str(out))
        assert res.returncode == 0, res.stderr
        info = json.loads(res.stdout)
        assert info["true_qcov"] == pytest.approx(0.5)
        assert out.exists()

        res2 = run_cli("estimate", "--config", str(cfg_path), "--obs", str(out))
        assert res2.returncode == 0, res2.stderr
        report = json.loads(res2.stdout)
        assert len(report["sigma_hat"]) == 3
        assert report["qcov"] is not None

    def test_simulate_deterministic_bytes(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(SMALL))
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run_cli("simulate", "--config", str(cfg_path), "--seed", "9", "--out", str(a))
        run_cli("simulate", "--config", str(cfg_path), "--seed", "9", "--out", str(b))
        assert a.read_bytes() == b.read_bytes()

    def test_montecarlo_csv(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(SMALL))
        out = tmp_path / "mc.csv"
        res = run_cli("montecarlo", "--config", str(cfg_path), "--reps", "2",
                      "--out", str(out))
        assert res.returncode == 0, res.stderr
        assert out.exists()
        assert "2/2 replications" in res.stderr

    def test_limits_values(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(dict(SMALL, sampling={"n": 5000, "lambda1": 1.0, "lambda2": 1.0})))
        res = run_cli("limits", "--config", str(cfg_path))
        assert res.returncode == 0, res.stderr
        payload = json.loads(res.stdout)
        assert payload["theoretical_min_std"] == pytest.approx(0.044, rel=0.05)
        assert np.asarray(payload["gamma2"]).shape == (2, 2)


class TestCsvErrors:
    def test_missing_component_rejected(self, tmp_path):
        p = tmp_path / "one.csv"
        p.write_text("component,index,time,value\n1,0,0.0,1.0\n1,1,0.5,2.0\n")
        with pytest.raises(DataError):
            read_csv(str(p))
