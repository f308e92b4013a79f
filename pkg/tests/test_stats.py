"""KS statistic and the extreme-value / Gamma maximum-likelihood fits."""

import math

import numpy as np
import pytest

from escapesim.stats import (FitError, fit_gamma, fit_gumbel, gamma_cdf,
                             gumbel_cdf, gumbel_sample, ks_statistic)


class TestKS:
    def test_plugin_quantiles(self):
        n = 500
        q = np.arange(1, n + 1) / (n + 1)
        samples = -np.log(-np.log(q))  # exact standard quantiles
        stat = ks_statistic(samples, gumbel_cdf).statistic
        assert stat <= 1 / (n + 1) + 1e-9

    def test_single_sample_at_median(self):
        med = -math.log(math.log(2.0))
        assert ks_statistic([med], gumbel_cdf).statistic == pytest.approx(0.5, abs=1e-12)

    def test_null_noise_level(self, rng):
        n = 10_000
        x = gumbel_sample(rng, n)
        stat = ks_statistic(x, gumbel_cdf).statistic
        assert stat < 1.63 / math.sqrt(n)  # 99% point of the null law

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            ks_statistic([], gumbel_cdf)


class TestGumbelFit:
    def test_recovers_parameters(self, rng):
        x = gumbel_sample(rng, 10_000, loc=2.0, scale=3.0)
        fit = fit_gumbel(x)
        assert abs(fit.location - 2.0) <= 0.05 * 3.0
        assert abs(fit.scale - 3.0) <= 0.05 * 3.0
        assert fit.ks_stat < 0.02

    def test_negative_location_and_small_scale(self, rng):
        x = gumbel_sample(rng, 5000, loc=-7.0, scale=0.05)
        fit = fit_gumbel(x)
        assert abs(fit.location + 7.0) <= 0.01
        assert abs(fit.scale - 0.05) <= 0.005

    def test_constant_sample_rejected(self):
        with pytest.raises(FitError):
            fit_gumbel(np.ones(500))

    def test_small_sample_rejected(self):
        with pytest.raises(FitError, match="200"):
            fit_gumbel(np.arange(50, dtype=float))

    def test_consistency_rate(self, rng):
        errs = {}
        for n in (1000, 10_000):
            e = []
            for _ in range(10):
                x = gumbel_sample(rng, n, loc=1.0, scale=2.0)
                fit = fit_gumbel(x)
                e.append(abs(fit.scale - 2.0) + abs(fit.location - 1.0))
            errs[n] = np.mean(e)
        assert errs[10_000] < 0.7 * errs[1000]  # expect about 1/sqrt(10)


class TestGammaFit:
    def test_recovers_shape(self, rng):
        x = rng.gamma(2.0, 1.0, size=10_000)
        fit = fit_gamma(x)
        assert abs(fit.shape - 2.0) <= 0.07 * 2.0
        assert abs(fit.scale - 1.0) <= 0.1
        assert fit.ks_stat < 0.02

    def test_exponential_case(self, rng):
        x = rng.exponential(0.8, size=20_000)
        fit = fit_gamma(x)
        assert abs(fit.shape - 1.0) <= 0.05

    def test_positive_samples_required(self, rng):
        with pytest.raises(FitError, match="positive"):
            fit_gamma(np.concatenate([rng.gamma(2, 1, 500), [-0.1]]))

    def test_constant_sample_rejected(self):
        with pytest.raises(FitError):
            fit_gamma(np.full(500, 2.0))

    def test_cdf_matches_scipy(self, rng):
        from scipy.stats import gamma as sp_gamma

        x = rng.uniform(0, 10, 50)
        assert np.allclose(gamma_cdf(x, 2.5, 1.3), sp_gamma.cdf(x, 2.5, scale=1.3))
