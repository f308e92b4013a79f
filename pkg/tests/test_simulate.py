"""Exact simulator: laws against closed-form oracles, reproducibility,
stopping-time detection, martingale extraction."""

import math

import numpy as np
import pytest

from escapesim import _kernels as K
from escapesim._compile import compile_model
from escapesim.model import (JumpSpec, PolynomialRate, PopulationModel,
                             barebones, linear_birth_death, stochastic_logistic)
from escapesim.simulate import (RngStream, SimulationError, StopSpec,
                                first_crossing, martingale_path, simulate,
                                simulate_truncated, state_at)

BB = barebones(1.0, 3.0, 0.6, "invasion", N=10_000)
HORIZON = [StopSpec("time_horizon", level=1.0)]


def pure_birth(rate=1.0, N=1000):
    jumps = (JumpSpec((1,), PolynomialRate.from_terms([(rate, (1,))]), s=0),)
    return PopulationModel("yule", 0, N, (0.0,), jumps)


def batch_states(model, X0, grid, replicas, seed, stream0=0, want_mart=0):
    cm = compile_model(model)
    grid = np.asarray(grid, dtype=float)
    R, G, d = replicas, grid.shape[0], model.d
    states = np.empty((R, G, d))
    intf = np.empty((R, G, d)) if want_mart else np.empty((R, 0, d))
    term = np.empty(R, np.int64)
    nev = np.empty(R, np.int64)
    K.batch_grid(seed, stream0, R, cm.jumps, cm.mstart, cm.mcoeff, cm.mfac,
                 cm.s_idx, cm.gbar0, cm.d1, 1.0 / cm.N, cm.x0, np.inf,
                 np.asarray(X0, dtype=float), grid, want_mart, 10**8,
                 states, intf, term, nev)
    return states, intf, term


class TestBasics:
    def test_zero_rates_absorbed_at_zero(self):
        jumps = (JumpSpec((1,), PolynomialRate.from_terms([(0.0, (1,))])),)
        m = PopulationModel("null", 1, 10, (0.0,), jumps)
        tr = simulate(m, [3], HORIZON, RngStream(1))
        assert tr.terminal == "absorbed"
        assert tr.n_events == 0
        assert tr.t_end == 0.0

    def test_requires_terminating_stop(self):
        with pytest.raises(ValueError, match="terminating"):
            simulate(BB, [10_000, 1], [StopSpec("second_block_zero")], RngStream(0))

    def test_reproducibility_bit_exact(self):
        a = simulate(BB, [10_000, 1], HORIZON, RngStream(99, 3))
        b = simulate(BB, [10_000, 1], HORIZON, RngStream(99, 3))
        assert np.array_equal(a.times, b.times)
        assert np.array_equal(a.jump_indices, b.jump_indices)
        c = simulate(BB, [10_000, 1], HORIZON, RngStream(99, 4))
        assert not np.array_equal(a.times, c.times)

    def test_times_strictly_increasing(self):
        tr = simulate(BB, [10_000, 1], HORIZON, RngStream(5))
        assert np.all(np.diff(tr.times) > 0)

    def test_non_negativity_along_path(self):
        tr = simulate(BB, [10_000, 1], HORIZON, RngStream(6))
        jumps = np.array([j.J for j in BB.jumps], dtype=float)
        states = tr.X0 + np.vstack([np.zeros(2), np.cumsum(jumps[tr.jump_indices], axis=0)])
        assert np.min(states) >= 0

    def test_event_cap_reported(self):
        tr = simulate(BB, [10_000, 1], [StopSpec("event_cap", level=100)], RngStream(2))
        assert tr.terminal == "event_cap"
        assert tr.n_events == 100

    def test_invalid_region_aborts_with_state(self):
        m = stochastic_logistic(N=100)
        with pytest.raises(SimulationError) as exc:
            simulate(m, [150], HORIZON, RngStream(3))
        assert exc.value.state is not None

    def test_snapshot_grid_matches_event_reconstruction(self):
        grid = np.linspace(0.0, 1.0, 17)
        tr = simulate(BB, [10_000, 2], [StopSpec("time_horizon", level=1.0)],
                      RngStream(11), snapshot_grid=grid)
        for t, snap in zip(tr.snapshot_times, tr.snapshot_states):
            assert np.array_equal(state_at(tr, t), snap)


class TestLawOracles:
    def test_yule_mean_growth(self):
        # linear birth at per-capita rate 1: E X(1)/X(0) = e
        m = pure_birth()
        states, _, _ = batch_states(m, [5.0], [1.0], 10_000, seed=101)
        ratios = states[:, 0, 0] / 5.0
        se = ratios.std(ddof=1) / math.sqrt(len(ratios))
        assert abs(ratios.mean() - math.e) <= 3 * se

    def test_escape_fraction_reaches_level(self):
        # weighted-level crossing before extinction, scale 10^4, level N^(7/12)+1
        level = 10_000 ** (7 / 12) + 1
        stops = [StopSpec("weighted_level", v=(1.0,), level=level),
                 StopSpec("second_block_zero"),
                 StopSpec("time_horizon", level=50.0)]
        hits = 0
        R = 3000
        for r in range(R):
            tr = simulate(BB, [10_000, 1], stops, RngStream(7, r), record_events=False)
            hit = tr.stopping.tau_alpha is not None
            hits += hit
        p = hits / R
        assert abs(p - 0.8) <= 3 * math.sqrt(0.8 * 0.2 / R)

    def test_bd_extinction_probability_closed_form(self):
        # lam=1, mu=2 from one individual: P(dead by t=2) = 2(e^2-1)/(2e^2-1)
        m = linear_birth_death(1.0, 2.0, N=1)
        cm = compile_model(m)
        R = 100_000
        out = [np.empty(R, np.int64), np.empty(R), np.empty(R, np.int64),
               np.empty(R), np.empty(R), np.empty(R, np.int64),
               np.empty((R, 1)), np.empty((R, 0, 1))]
        K.batch_escape(202, 0, R, cm.jumps, cm.mstart, cm.mcoeff, cm.mfac,
                       cm.s_idx, cm.gbar0, cm.d1, 1.0, cm.x0, np.inf,
                       np.array([1.0]), np.ones(1), np.inf, 1, 2.0, 10**7,
                       np.empty(0), *out)
        tau0 = out[4]
        p_hat = np.mean(~np.isnan(tau0))
        e2 = math.exp(2.0)
        p = 2 * (e2 - 1) / (2 * e2 - 1)
        assert abs(p_hat - p) <= 3 * math.sqrt(p * (1 - p) / R)


class TestTruncated:
    def test_wide_truncation_identical(self):
        stops = [StopSpec("time_horizon", level=0.5)]
        a = simulate(BB, [10_000, 1], stops, RngStream(31, 0))
        b = simulate_truncated(BB, 1e9, [10_000, 1], stops, RngStream(31, 0))
        assert np.array_equal(a.times, b.times)
        assert np.array_equal(a.jump_indices, b.jump_indices)

    def test_paths_agree_until_first_exit(self):
        theta = 0.02
        stops = [StopSpec("time_horizon", level=3.0)]
        plain = simulate(BB, [10_000, 1], stops, RngStream(37, 5))
        trunc = simulate_truncated(BB, theta, [10_000, 1], stops, RngStream(37, 5))
        jumps = np.array([j.J for j in BB.jumps], dtype=float)
        states = plain.X0 + np.cumsum(jumps[plain.jump_indices], axis=0)
        dens = states / BB.N
        dist = np.linalg.norm(dens - np.asarray(BB.x0), axis=1)
        exits = np.nonzero(dist > theta)[0]
        assert exits.size, "test needs a path that leaves the truncation ball"
        k = exits[0] + 1  # identical through the exit event itself
        assert np.array_equal(plain.times[:k], trunc.times[:k])
        assert np.array_equal(plain.jump_indices[:k], trunc.jump_indices[:k])
        # and they eventually part ways
        n = min(plain.n_events, trunc.n_events)
        assert not np.array_equal(plain.jump_indices[:n], trunc.jump_indices[:n])

    def test_theta_positive_required(self):
        with pytest.raises(ValueError):
            simulate_truncated(BB, 0.0, [10_000, 1], HORIZON, RngStream(0))


class TestMartingale:
    def test_zero_rate_model_zero_path(self):
        jumps = (JumpSpec((1,), PolynomialRate.from_terms([(0.0, (1,))])),)
        m = PopulationModel("null", 1, 10, (5.0,), jumps)
        tr = simulate(m, [50], HORIZON, RngStream(1))
        path = martingale_path(tr, [0.0, 0.3, 1.0 * tr.t_end])
        assert np.max(np.abs(path)) == 0.0

    def test_mean_zero_at_unit_time(self):
        _, intf, _ = batch_states(BB, [10_000.0, 1.0], [1.0], 2000, seed=55,
                                  want_mart=1)
        states, intf, _ = batch_states(BB, [10_000.0, 1.0], [1.0], 2000, seed=55,
                                       want_mart=1)
        m = states[:, 0, :] / BB.N - np.array([1.0, 1e-4]) - intf[:, 0, :]
        se = m.std(axis=0, ddof=1) / math.sqrt(m.shape[0])
        assert np.all(np.abs(m.mean(axis=0)) <= 4 * se)

    def test_martingale_path_matches_kernel_integral(self):
        # same stream -> same trajectory; the python-side exact integral must
        # agree with the kernel-side accumulation up to summation order
        grid = np.array([0.2, 0.7, 1.0])
        tr = simulate(BB, [10_000, 3], [StopSpec("time_horizon", level=1.0)],
                      RngStream(72, 0))
        path = martingale_path(tr, grid)
        states, intf, _ = batch_states(BB, [10_000.0, 3.0], grid, 1, seed=72,
                                       stream0=0, want_mart=1)
        kernel_path = states[0] / BB.N - np.array([1.0, 3.0 / BB.N]) - intf[0]
        assert np.allclose(path, kernel_path, atol=1e-12)

    def test_sup_scaling_with_N(self):
        grid = np.linspace(0.05, 1.0, 20)
        meds = []
        Ns = [1000, 10_000, 100_000]
        for k, N in enumerate(Ns):
            m = BB.with_scale(N)
            states, intf, _ = batch_states(m, [float(N), 1.0], grid, 200,
                                           seed=81, stream0=k * 10_000, want_mart=1)
            x0 = np.array([1.0, 1.0 / N])
            mart = states / N - x0[None, None, :] - intf
            sup = np.max(np.linalg.norm(mart, axis=2), axis=1)
            meds.append(np.median(sup))
        slope = np.polyfit(np.log(Ns), np.log(meds), 1)[0]
        assert -0.65 <= slope <= -0.35


class TestFirstCrossing:
    def test_initial_state_crossing(self):
        tr = simulate(BB, [10_000, 5], HORIZON, RngStream(3))
        assert first_crossing(tr, [1.0], 4.0) == 0.0

    def test_monotone_path_exact_event(self):
        m = pure_birth()
        tr = simulate(m, [1], [StopSpec("time_horizon", level=3.0)], RngStream(12))
        assert tr.n_events >= 4
        # level 4.5 is crossed by the event taking the count from 4 to 5
        t = first_crossing(tr, [1.0], 4.5)
        assert t == tr.times[3]

    def test_never_crossed_is_none(self):
        m = pure_birth()
        tr = simulate(m, [1], [StopSpec("time_horizon", level=0.01)], RngStream(10))
        assert first_crossing(tr, [1.0], 1e9) is None

    def test_crossing_time_slope_in_scale(self):
        means = []
        Ns = [1000, 100_000]
        R = 800
        for k, N in enumerate(Ns):
            m = BB.with_scale(N)
            level = N ** (7 / 12) + 1
            taus = []
            cm = compile_model(m)
            out_term = np.empty(R, np.int64)
            out_t = np.empty(R)
            out_nev = np.empty(R, np.int64)
            out_tau = np.empty(R)
            out_tau0 = np.empty(R)
            out_nu = np.empty(R, np.int64)
            out_end = np.empty((R, 2))
            out_win = np.empty((R, 0, 2))
            K.batch_escape(404, k * 10_000, R, cm.jumps, cm.mstart, cm.mcoeff,
                           cm.mfac, cm.s_idx, cm.gbar0, cm.d1, 1.0 / cm.N,
                           cm.x0, np.inf, np.array([float(N), 1.0]), np.ones(1),
                           level, 1, np.inf, 10**9, np.empty(0),
                           out_term, out_t, out_nev, out_tau, out_tau0, out_nu,
                           out_end, out_win)
            means.append(np.nanmean(out_tau))
        slope = (means[1] - means[0]) / (math.log(Ns[1]) - math.log(Ns[0]))
        target = (7 / 12) / 2.4
        assert abs(slope - target) <= 0.1 * target
