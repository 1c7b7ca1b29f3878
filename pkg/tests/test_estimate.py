"""Estimator contracts: noise variance, plug-in, MLE, Bayes, information."""

import json

import numpy as np
import pytest

import blockqmle.estimate as est
from blockqmle.blocks import BlockConfig, build_blocks
from blockqmle.estimate import (
    bayes,
    estimate_noise_variance,
    estimate_pipeline,
    mle,
    observed_info,
    plug_in_noise,
    qcov_estimate,
)
from blockqmle.models import ConstantDiffusion
from blockqmle.simulate import (
    NoiseConfig,
    ObservationSet,
    PathConfig,
    SamplingConfig,
    observe,
    simulate_latent_path,
    simulate_observations,
)


def sync_obs(values1, values2, T=1.0):
    n = len(values1)
    t = np.linspace(0, T, n)
    return ObservationSet(times=(t, t),
                          values=(np.asarray(values1, float), np.asarray(values2, float)),
                          T=T)


class TestNoiseVariance:
    def test_alternating_marks(self):
        c = 0.3
        y = np.tile([0.0, c], 50)
        v = estimate_noise_variance(sync_obs(y, y))
        assert v[0] == pytest.approx(c * c / 2)

    def test_constant_marks(self):
        v = estimate_noise_variance(sync_obs(np.ones(40), np.ones(40)))
        np.testing.assert_array_equal(v, [0.0, 0.0])

    def test_monte_carlo_mean_includes_path_variation(self):
        # raw estimator absorbs roughly half the mean squared increment of
        # the latent path on top of the true noise variance
        vals = []
        for seed in range(30):
            obs, _ = simulate_observations(PathConfig(fine_grid_points=20_000),
                                           SamplingConfig(n=1000),
                                           NoiseConfig(v=(0.001, 0.001)), seed=(1, seed))
            vals.append(estimate_noise_variance(obs))
        mean = np.mean(vals, axis=0)
        np.testing.assert_allclose(mean, [0.0015, 0.0015], rtol=0.07)


class TestPlugIn:
    def make_bd(self, n_obs=1001):
        t = np.linspace(0, 1, n_obs)
        obs = ObservationSet(times=(t, t), values=(np.zeros(n_obs), np.zeros(n_obs)), T=1.0)
        return build_blocks(obs, BlockConfig(b_n=n_obs - 1))

    def test_exact_correction_arithmetic(self, model):
        bd = self.make_bd(1001)  # 1000 increments per component
        v = plug_in_noise(np.array([0.0015, 0.0015]), np.array([1.0, 0.0, 1.0]), bd, model)
        assert v[0] == pytest.approx(0.0015 - 1.0 / 2000.0, rel=1e-12)

    def test_floor_at_zero(self, model):
        bd = self.make_bd(101)
        v = plug_in_noise(np.array([1e-6, 1e-6]), np.array([2.0, 0.0, 2.0]), bd, model)
        np.testing.assert_array_equal(v, [0.0, 0.0])

    def test_zero_diffusion_leaves_estimate(self, model):
        bd = self.make_bd(101)
        v0 = np.array([0.002, 0.003])
        v = plug_in_noise(v0, np.array([0.0, 0.0, 0.0]), bd, model)
        np.testing.assert_allclose(v, v0)


class TestMle:
    def test_degenerate_box_returns_the_point(self, bd200):
        target = np.array([1.0, 0.8, 0.5])
        m = ConstantDiffusion(lower=target.copy(), upper=target.copy())
        np.testing.assert_array_equal(mle(bd200, m, np.array([0.001, 0.001])), target)

    def test_near_noiseless_synchronous_recovery(self, model):
        # dense synchronous sampling with no noise identifies the
        # diffusion matrix to a couple of percent on one path
        path = simulate_latent_path(PathConfig(sigma=(1.0, np.sqrt(0.75), 0.5)), 31)
        t = np.linspace(0, 1, 5001)
        obs = observe(path, (t, t), NoiseConfig(v=(0.0, 0.0)), 32)
        obs.n = 5000
        bd = build_blocks(obs, BlockConfig(b_n=5000))
        sig = mle(bd, model, np.array([1e-12, 1e-12]))
        np.testing.assert_allclose(sig, [1.0, np.sqrt(0.75), 0.5], rtol=0.02)

    def test_sign_symmetric_coordinate_reported_nonnegative(self, bd2000, model):
        sig = mle(bd2000, model, np.array([0.001, 0.001]))
        assert sig[1] >= 0


class TestPipeline:
    def test_shift_invariance_end_to_end(self, obs2000, model):
        rep = estimate_pipeline(obs2000, model)
        shifted = ObservationSet(
            times=obs2000.times,
            values=(obs2000.values[0] + 3.0, obs2000.values[1] - 11.0),
            T=obs2000.T, n=obs2000.n,
        )
        rep_s = estimate_pipeline(shifted, model)
        np.testing.assert_allclose(rep_s.sigma_hat, rep.sigma_hat, atol=1e-9)
        np.testing.assert_allclose(rep_s.v_plugin, rep.v_plugin, atol=1e-15)
        assert rep_s.qcov == pytest.approx(rep.qcov, abs=1e-9)

    def test_negated_components_leave_qcov(self, obs2000, model):
        negated = ObservationSet(
            times=obs2000.times,
            values=(-obs2000.values[0], -obs2000.values[1]),
            T=obs2000.T, n=obs2000.n,
        )
        rep = estimate_pipeline(obs2000, model)
        rep_n = estimate_pipeline(negated, model)
        assert rep_n.qcov == pytest.approx(rep.qcov, abs=1e-9)

    def test_report_serialization_keys(self, obs2000, model):
        rep = estimate_pipeline(obs2000, model)
        d = json.loads(rep.to_json())
        for key in ("sigma_hat", "v_hat", "v_plugin", "sigma_bayes", "gamma_hat",
                    "stderr", "qcov", "qcov_stderr", "diagnostics"):
            assert key in d
        assert len(d["sigma_hat"]) == 3
        assert d["sigma_bayes"] is None

    def test_stderr_close_to_asymptotic_scale(self, obs2000, model):
        rep = estimate_pipeline(obs2000, model)
        assert rep.stderr is not None
        # var scale is b_n^(-1/4); coordinates land in a plausible band
        assert np.all(rep.stderr > 0.01)
        assert np.all(rep.stderr < 0.2)


class TestQcovFunctional:
    def test_constant_model_product_form(self, bd2000, model):
        sig = np.array([1.1, 0.8, 0.45])
        assert qcov_estimate(bd2000, model, sig) == pytest.approx(1.1 * 0.45, rel=1e-12)


class TestObservedInfo:
    def test_quadratic_surface_recovers_curvature(self, bd200, model, monkeypatch):
        A = np.array([[4.0, 0.7, 0.0], [0.7, 3.0, 0.4], [0.0, 0.4, 2.0]])
        s0 = np.array([1.0, 0.8, 0.5])
        root = np.sqrt(bd200.b_n)

        def fake_grad(bd, m, sigma, v, diag=None):
            return -root * (A @ (np.asarray(sigma) - s0))

        import blockqmle.likelihood as lik

        monkeypatch.setattr(lik, "loglik_grad", fake_grad)
        gamma = observed_info(bd200, model, s0, np.array([0.001, 0.001]))
        np.testing.assert_allclose(gamma, A, rtol=1e-6, atol=1e-8)

    def test_positive_definite_on_simulated_data(self, obs2000, model):
        rep = estimate_pipeline(obs2000, model)
        eigs = np.linalg.eigvalsh(rep.gamma_hat)
        assert np.all(eigs > 0)


class TestBayes:
    def test_gaussian_surface_posterior_mean(self, bd200, model, monkeypatch):
        s0 = np.array([1.5, 0.5, 1.2])
        prec = np.diag([1 / 0.2 ** 2, 1 / 0.2 ** 2, 1 / 0.2 ** 2])

        def fake_batch(bd, m, sigmas, v, diag=None):
            d = np.asarray(sigmas) - s0
            return -0.5 * np.einsum("ij,jk,ik->i", d, prec, d)

        def fake_scalar(bd, m, sigma, v, diag=None):
            d = np.asarray(sigma) - s0
            return float(-0.5 * d @ prec @ d)

        monkeypatch.setattr(est, "loglik_batch", fake_batch)
        monkeypatch.setattr(est, "loglik", fake_scalar)
        out = bayes(bd200, model, np.array([0.001, 0.001]), grid_points=41)
        np.testing.assert_allclose(out, s0, atol=0.02)

    def test_prior_scaling_cancels(self, bd200, model, monkeypatch):
        s0 = np.array([1.5, 0.5, 1.2])

        def fake_batch(bd, m, sigmas, v, diag=None):
            d = np.asarray(sigmas) - s0
            return -0.5 * np.sum(d * d, axis=1) / 0.2 ** 2

        def fake_scalar(bd, m, sigma, v, diag=None):
            d = np.asarray(sigma) - s0
            return float(-0.5 * d @ d) / 0.2 ** 2

        monkeypatch.setattr(est, "loglik_batch", fake_batch)
        monkeypatch.setattr(est, "loglik", fake_scalar)
        v = np.array([0.001, 0.001])
        a = bayes(bd200, model, v, prior=lambda s: 1.0)
        b = bayes(bd200, model, v, prior=lambda s: 7.5)
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_sharp_posterior_escalates_to_metropolis(self, obs2000, model):
        diag = {}
        bd = build_blocks(obs2000, BlockConfig(b_n=2000))
        v = estimate_noise_variance(obs2000)
        out = bayes(bd, model, v, diag=diag,
                    mcmc_burn=500, mcmc_samples=1500)
        assert diag["bayes_method"] == "metropolis"
        assert diag.get("bayes_resolution_warning")
        sig = mle(bd, model, v)
        assert np.max(np.abs(out - sig)) < 0.15

    def test_metropolis_deterministic_in_seed(self, bd200, model):
        v = np.array([0.001, 0.001])
        kw = dict(mcmc_burn=200, mcmc_samples=400, probe_points=5, seed=3)
        a = bayes(bd200, model, v, **kw)
        b = bayes(bd200, model, v, **kw)
        np.testing.assert_array_equal(a, b)
