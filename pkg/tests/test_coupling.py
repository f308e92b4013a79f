"""Coupling construction, likelihood ratios, TV estimators, gap experiment."""

import math

import numpy as np
import pytest
from scipy import stats as sps

from escapesim import _kernels as K
from escapesim._compile import compile_model
from escapesim.branching import from_model
from escapesim.coupling import (couple_batch, couple_run, divergence_curve,
                                logistic_lr, lr_exponent_samples,
                                symmetric_gap_experiment, tv_lower_from_lr)
from escapesim.coupling import LRSample, TVEstimate
from escapesim.model import barebones, linear_birth_death, stochastic_logistic
from escapesim.simulate import RngStream


class TestCoupleRun:
    def test_constant_rates_never_diverge(self):
        # gbar constant: q_N == q, so the two sides are glued forever
        m = linear_birth_death(3.0, 0.6, N=500)
        term, div_t, cause, tau, zext, nev, zT = couple_batch(
            m, [1], 5 / 12, np.inf, RngStream(41), 500)
        assert np.all(np.isnan(div_t))
        crossed = term == K.TERM_LEVEL
        extinct = zext == 1
        assert np.all(crossed | extinct)
        assert np.all(np.isfinite(tau[crossed]))

    def test_zero_founders_joint_extinction(self):
        m = barebones(1, 3, 0.6, "invasion", N=1000)
        run = couple_run(m, [0], 5 / 12, np.inf, RngStream(1))
        assert run.terminal == "joint_extinction"
        assert run.divergence_time is None
        assert run.z_extinct_first

    def test_divergence_cause_is_rate_mismatch(self):
        # both rates stay positive in this model, so a solo jump can only
        # come from a rate mismatch
        m = barebones(1, 3, 0.6, "invasion", N=300)
        causes = set()
        for r in range(60):
            run = couple_run(m, [1], 5 / 12, np.inf, RngStream(42, r))
            if run.divergence_cause is not None:
                causes.add(run.divergence_cause)
        assert causes == {"rate_mismatch_jump"}

    def test_divergence_bounds_tv_on_matched_window(self):
        # logistic chain: the branching side makes exactly level-1 jumps, so
        # the LR window of m jumps matches the coupling window exactly
        N = 2000
        alpha = 5 / 12
        level = math.ceil(N ** (1 - alpha) + 1)
        m_jumps = level - 1
        model = stochastic_logistic(N=N)
        R = 4000
        term, div_t, *_ = couple_batch(model, [1], alpha, np.inf,
                                       RngStream(43), R,
                                       level=float(level))
        frac = float(np.mean(~np.isnan(div_t)))
        tv = tv_lower_from_lr(logistic_lr(N, m_jumps, RngStream(44), replicas=R))
        assert frac >= tv.value - 3 * tv.stderr

    def test_branching_marginal_undistorted(self):
        # continue through divergence: z(T) must follow the branching law
        model = barebones(1, 3, 0.6, "invasion", N=10_000)
        R = 10_000
        T = 1.0
        *_, zT = couple_batch(model, [1], 5 / 12, T, RngStream(45), R,
                              stop_at_divergence=False, level=np.inf)
        spec = from_model(model)
        cm = compile_model(spec.to_model())
        states = np.empty((R, 1, 1))
        intf = np.empty((R, 0, 1))
        term = np.empty(R, np.int64)
        nev = np.empty(R, np.int64)
        K.batch_grid(46, 0, R, cm.jumps, cm.mstart, cm.mcoeff, cm.mfac,
                     cm.s_idx, cm.gbar0, cm.d1, 1.0, cm.x0, np.inf,
                     np.array([1.0]), np.array([T]), 0, 10**7,
                     states, intf, term, nev)
        zb = states[:, 0, 0]
        za = zT[:, 0]
        edges = np.unique(np.quantile(np.concatenate([za, zb]),
                                      np.linspace(0, 1, 21)))
        ca, _ = np.histogram(za, bins=edges)
        cb, _ = np.histogram(zb, bins=edges)
        keep = (ca + cb) > 5
        res = sps.chi2_contingency(np.vstack([ca[keep], cb[keep]]))
        assert res[1] > 0.001

    def test_divergence_requires_growth_regime(self):
        m = barebones(1, 3, 0.6, "extinction", N=1000)
        with pytest.raises(ValueError, match="growth regime"):
            couple_batch(m, [1], 5 / 12, np.inf, RngStream(0), 10)


class TestLogisticLR:
    def test_empty_product(self):
        s = logistic_lr(100, 0, RngStream(0))[0]
        assert s.value == 1.0 and s.log_terms == 0.0

    def test_injected_holding_time(self):
        s = logistic_lr(100, 1, RngStream(0), injected_times=[1.0])[0]
        assert s.value == pytest.approx(math.exp(0.01) * 0.99, rel=1e-12)

    def test_m_at_least_N_rejected(self):
        with pytest.raises(ValueError, match="below N"):
            logistic_lr(100, 100, RngStream(0))

    def test_exponent_clt_variance(self):
        N = 10_000
        m = int(N ** (2 / 3))
        x = lr_exponent_samples(N, m, RngStream(47), 10_000)
        target = (m / N ** (2 / 3)) ** 3 / 3
        assert abs(np.var(x, ddof=1) - target) <= 0.1 * target

    def test_lr_martingale_mean_one(self):
        N = 10_000
        m = 100  # below sqrt(N)
        vals = np.array([s.value for s in
                         logistic_lr(N, m, RngStream(48), replicas=10_000)])
        se = vals.std(ddof=1) / math.sqrt(len(vals))
        assert abs(vals.mean() - 1.0) <= 4 * se


class TestTVEstimate:
    def test_all_unit_ratios(self):
        samples = [LRSample(1.0, 5, 0.0)] * 200
        assert tv_lower_from_lr(samples).value == 0.0

    def test_simple_arithmetic(self):
        samples = [LRSample(0.5, 1, 0.0), LRSample(1.5, 1, 0.0)] * 100
        assert tv_lower_from_lr(samples).value == pytest.approx(0.25)

    def test_sample_floor(self):
        with pytest.raises(ValueError, match="100"):
            tv_lower_from_lr([LRSample(1.0, 1, 0.0)] * 50)

    def test_range_invariant(self):
        with pytest.raises(ValueError):
            TVEstimate(value=1.5, stderr=0.0, method="lr_formula")

    def test_breakdown_scale_nonvanishing(self):
        N = 10_000
        est = tv_lower_from_lr(
            logistic_lr(N, int(N ** (2 / 3)), RngStream(49), replicas=5000))
        assert est.value > 0.05 and est.stderr < 0.01
        small = tv_lower_from_lr(
            logistic_lr(N, int(N ** 0.25), RngStream(50), replicas=5000))
        assert small.value < 0.02


class TestDivergenceCurve:
    def test_constant_rate_model_all_zero(self):
        m = linear_birth_death(3.0, 0.6, N=100)
        pts = divergence_curve(m, [100, 1000], 5 / 12, 300, RngStream(51))
        assert all(p.fraction == 0.0 for p in pts)

    def test_low_exponent_fraction_stays_large(self):
        # alpha below the breakdown point: the window is too long for the
        # frozen-rate approximation and most couplings break
        m = stochastic_logistic(N=2000)
        pts = divergence_curve(m, [500, 2000], 0.25, 400, RngStream(52))
        assert pts[-1].fraction > 0.05

    def test_csv_export(self, tmp_path):
        from escapesim.coupling import divergence_curve_csv

        m = linear_birth_death(3.0, 0.6, N=100)
        pts = divergence_curve(m, [100], 5 / 12, 150, RngStream(53))
        path = tmp_path / "curve.csv"
        divergence_curve_csv(pts, str(path))
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "N,divergence_fraction,ci_low,ci_high"
        assert lines[1].startswith("100,")


class TestSymmetricGap:
    def test_rescaled_gap_centred_and_spread(self):
        gaps = symmetric_gap_experiment(0.25, 10_000, 1500, RngStream(54))
        se = gaps.std(ddof=1) / math.sqrt(len(gaps))
        assert abs(gaps.mean()) <= 4 * se          # symmetric limit
        assert gaps.std(ddof=1) > 0.05             # non-degenerate spread

    def test_unrescaled_gap_larger_for_smaller_eta(self):
        N = 10_000
        g_small = symmetric_gap_experiment(0.1, N, 800, RngStream(55)) / N ** 0.2
        g_large = symmetric_gap_experiment(0.45, N, 800, RngStream(56)) / N ** 0.9
        assert g_small.std(ddof=1) > g_large.std(ddof=1)

    def test_eta_range(self):
        with pytest.raises(ValueError):
            symmetric_gap_experiment(0.5, 100, 10, RngStream(0))
