"""Flow integration, timescales, integral-identity residuals, envelopes."""

import math

import numpy as np
import pytest

from escapesim.flow import (escape_point, integrate, integrate_field,
                            lemma_envelopes, timescales, voc_residual)
from escapesim.model import (JumpSpec, PolynomialRate, PopulationModel,
                             barebones, linear_birth_death,
                             stochastic_logistic, two_type_symmetric)
from escapesim.spectral import spectral_data

BB = barebones(1.0, 3.0, 0.6, "invasion", N=10_000)


def logistic_exact(t, x0=0.01):
    return 1.0 / (1.0 + (1.0 / x0 - 1.0) * math.exp(-t))


class TestIntegrate:
    def test_zero_field_constant(self):
        jumps = (JumpSpec((1,), PolynomialRate.from_terms([(0.0, (1,))])),)
        m = PopulationModel("null", 1, 10, (0.0,), jumps)
        traj = integrate(m, [0.7], 5.0, 1e-10)
        assert np.allclose(traj.states, 0.7)

    def test_logistic_closed_form(self):
        m = stochastic_logistic()
        tol = 1e-9
        traj = integrate(m, [0.01], 5.0, tol)
        err = abs(traj.at(5.0)[0] - logistic_exact(5.0))
        assert err <= tol

    def test_substitution_fixed_point(self):
        # resident drops out, invader settles at its carrying capacity
        traj = integrate(BB, [1.0, 1e-6], 40.0, 1e-10)
        assert np.max(np.abs(traj.at(40.0) - np.array([0.0, 3.0]))) <= 1e-6

    def test_tolerance_range_enforced(self):
        with pytest.raises(ValueError, match="tol"):
            integrate(BB, [1.0, 0.0], 1.0, 1e-4)

    def test_fixed_step_order(self):
        F = lambda y: y * (1 - y)
        errs = []
        for h in (0.2, 0.1):
            traj = integrate_field(F, np.array([0.01]), 5.0, fixed_step=h)
            errs.append(abs(traj.states[-1, 0] - logistic_exact(5.0)))
        assert errs[0] / errs[1] >= 4  # fifth-order pair: expect ~32

    def test_adaptive_error_decreases_with_tol(self):
        errs = []
        for tol in (1e-7, 1e-10):
            traj = integrate(stochastic_logistic(), [0.01], 5.0, tol)
            errs.append(abs(traj.at(5.0)[0] - logistic_exact(5.0)))
        assert errs[1] < errs[0]

    def test_dense_output_against_half_tolerance(self, rng):
        tol = 1e-8
        traj = integrate(BB, [1.001, 1e-3], 3.0, tol)
        ref = integrate(BB, [1.001, 1e-3], 3.0, tol / 2)
        ts = rng.uniform(0, 3.0, 50)
        diff = np.max(np.abs(traj.at(ts) - ref.at(ts)))
        assert diff <= 10 * tol

    def test_out_of_span_eval_rejected(self):
        traj = integrate(BB, [1.0, 0.0], 1.0, 1e-9)
        with pytest.raises(ValueError):
            traj.at(2.0)


class TestTimescales:
    SP = spectral_data(BB)
    SPX = spectral_data(barebones(1.0, 3.0, 0.6, "extinction"))

    def test_threshold_time_formula(self):
        ts = timescales(self.SP, 1e6, alpha=5 / 12, Z0=[1.0])
        assert ts.t_xi_alpha == pytest.approx((7 / 12) * math.log(1e6) / 2.4, rel=1e-12)
        assert ts.t_xi_alpha == pytest.approx(3.35793659, abs=1e-7)

    def test_equal_levels_zero_time(self):
        ts = timescales(self.SP, 100, delta=0.1, eps=0.1)
        assert ts.t0 == 0.0

    def test_decay_entry_time(self):
        ts = timescales(self.SPX, 1e6, delta=0.1, eps=1e-3)
        assert ts.t_n_delta == pytest.approx(4.3173470, abs=1e-6)
        assert ts.t_hat == pytest.approx((7 / 12) * math.log(1e6) / abs(self.SPX.beta0),
                                         rel=1e-12)

    def test_monotone_in_eps(self):
        eps = [1e-2, 1e-3, 1e-4]
        t0s = [timescales(self.SP, 100, delta=0.1, eps=e).t0 for e in eps]
        assert t0s[0] < t0s[1] < t0s[2]
        t1s = [timescales(self.SPX, 100, delta=0.1, eps=e).t1 for e in eps]
        assert t1s[0] < t1s[1] < t1s[2]

    def test_scale_slope_exact(self):
        t1 = timescales(self.SP, 1e4, alpha=5 / 12, Z0=[1.0]).t_xi_alpha
        t2 = timescales(self.SP, 1e6, alpha=5 / 12, Z0=[1.0]).t_xi_alpha
        slope = (t2 - t1) / (math.log(1e6) - math.log(1e4))
        assert slope == pytest.approx((1 - 5 / 12) / 2.4, rel=1e-12)

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            timescales(self.SP, 1)
        with pytest.raises(ValueError):
            timescales(self.SP, 100, delta=0.01, eps=0.1)
        with pytest.raises(ValueError):
            timescales(self.SP, 100, Z0=[0.0])


class TestVocResidual:
    def test_linear_models_exact(self):
        for m in (linear_birth_death(3.0, 0.6), two_type_symmetric(0.25)):
            xi0 = np.asarray(m.x0) + 1e-3
            traj = integrate(m, xi0, 2.0, 1e-10)
            resid = voc_residual(m, traj, [0.5, 1.0, 2.0])
            assert np.max(resid) <= 1e-8, m.name

    def test_barebones_self_consistency(self):
        T = math.log(0.1 / 1e-4) / 2.4
        traj = integrate(BB, [1.001, 1e-4], T, 1e-10)
        resid = voc_residual(BB, traj, np.linspace(0.1, T, 8))
        assert np.max(resid) <= 1e-6

    def test_corrupted_trajectory_detected(self):
        T = 2.0
        traj = integrate(BB, [1.001, 1e-4], T, 1e-10)

        class Corrupted:
            t_end = traj.t_end
            states = traj.states + 1e-3

            def at(self, t):
                return traj.at(t) + 1e-3

        resid = voc_residual(BB, Corrupted(), [1.0, 2.0])
        assert np.max(resid) > 1e-4


class TestEnvelopes:
    def test_growth_regime_stable_constants(self):
        fits = {f.bound_id: f for f in
                lemma_envelopes(BB, [1e-3, 1e-4, 1e-5], delta=0.1)}
        assert set(fits) == {"growth-k1", "growth-k2", "growth-k3"}
        assert fits["growth-k2"].passed
        assert fits["growth-k1"].passed
        ratios = np.asarray(fits["growth-k2"].ratios)
        assert ratios.max() / ratios.min() < 2  # factor-2 stability observed

    def test_linear_model_linearization_exact(self):
        fits = {f.bound_id: f for f in
                lemma_envelopes(two_type_symmetric(0.25), [1e-3, 1e-4], delta=0.1)}
        assert fits["growth-k3"].fitted_constant < 1e-2

    def test_decay_regime(self):
        m = barebones(1.0, 3.0, 0.6, "extinction")
        fits = {f.bound_id: f for f in lemma_envelopes(m, [0.05, 0.1])}
        assert set(fits) == {"decay-k1", "decay-k2", "decay-k3"}
        assert fits["decay-k2"].passed


class TestEscapePoint:
    def test_positivity_at_scale(self):
        ep = escape_point(BB, 1e6, 0.05)
        assert ep.positive
        assert ep.min_component > 1e-3

    def test_zero_extra_matches_linearized_level(self):
        ep = escape_point(BB, 1e6, 0.0)
        # second block sits at N^(-5/12) * u up to lower order
        target = 1e6 ** (-5 / 12)
        assert abs(ep.state[1] - target) <= 0.05 * target

    def test_zero_founders_rejected(self):
        with pytest.raises(ValueError, match="no escape"):
            escape_point(BB, 1e6, 0.05, Z0=[0.0])

    def test_decay_regime_rejected(self):
        with pytest.raises(ValueError, match="beta0 > 0"):
            escape_point(barebones(1, 3, 0.6, "extinction"), 1e6, 0.05)
