"""Dominant eigendata, matrix exponential, stability checks."""

import numpy as np
import pytest

from escapesim.model import barebones, jacobian
from escapesim.spectral import (SpectralError, matrix_exp, perron,
                                spectral_data, stability_check)


def random_metzler(rng, n, scale=1.0):
    M = rng.uniform(0.05, scale, (n, n))
    M[np.diag_indices(n)] = rng.uniform(-scale, scale, n)
    return M


class TestPerron:
    def test_symmetric_mixing_matrix(self):
        eta = 0.25
        B0 = np.array([[1 - eta, eta], [eta, 1 - eta]])
        sd = perron(B0)
        assert abs(sd.beta0 - 1.0) < 1e-12
        assert np.max(np.abs(sd.u - 0.5)) < 1e-12
        assert np.max(np.abs(sd.v - 1.0)) < 1e-12
        assert abs(sd.gap - 2 * eta) < 1e-10

    def test_scalar(self):
        sd = perron(np.array([[2.4]]))
        assert sd.beta0 == pytest.approx(2.4, abs=1e-14)
        assert sd.u[0] == 1.0 and sd.v[0] == 1.0
        assert sd.gap == np.inf

    def test_random_metzler_against_dense_oracle(self, rng):
        for _ in range(20):
            B0 = random_metzler(rng, 3)
            sd = perron(B0)
            scale = np.linalg.norm(B0)
            assert np.linalg.norm(B0 @ sd.u - sd.beta0 * sd.u) <= 1e-10 * scale
            assert np.linalg.norm(B0.T @ sd.v - sd.beta0 * sd.v) <= 1e-10 * scale
            eig = np.linalg.eigvals(B0)
            assert abs(sd.beta0 - np.max(eig.real)) <= 1e-9 * max(1, scale)

    def test_normalizations_asserted(self, rng):
        for _ in range(10):
            sd = perron(random_metzler(rng, 4))
            assert abs(np.sum(sd.u) - 1.0) <= 1e-12
            assert abs(sd.u @ sd.v - 1.0) <= 1e-12
            assert np.all(sd.u > 0) and np.all(sd.v > 0)

    def test_shift_invariance(self, rng):
        B0 = random_metzler(rng, 3)
        base = perron(B0)
        for sigma in (1.0, 10.0):
            sh = perron(B0 + sigma * np.eye(3))
            assert abs(sh.beta0 - base.beta0 - sigma) <= 1e-9
            assert np.max(np.abs(sh.u - base.u)) <= 1e-9
            assert np.max(np.abs(sh.v - base.v)) <= 1e-9

    def test_subcritical_scalar(self):
        sd = perron(np.array([[-0.8]]))
        assert sd.beta0 == pytest.approx(-0.8, abs=1e-14)

    def test_reducible_rejected(self):
        with pytest.raises(SpectralError, match="reducible"):
            perron(np.array([[1.0, 0.0], [0.0, 2.0]]))

    def test_non_metzler_rejected(self):
        with pytest.raises(SpectralError, match="Metzler"):
            perron(np.array([[1.0, -0.5], [0.3, 1.0]]))

    def test_non_square_rejected(self):
        with pytest.raises(SpectralError, match="square"):
            perron(np.ones((2, 3)))

    def test_model_spectral_data(self):
        sd = spectral_data(barebones(1, 3, 0.6, "invasion"))
        assert sd.beta0 == pytest.approx(2.4, abs=1e-12)
        sd = spectral_data(barebones(1, 3, 0.6, "extinction"))
        assert sd.beta0 == pytest.approx(-0.8, abs=1e-12)


def taylor_exp(M, t, cutoff=1e-16):
    A = M * t
    term = np.eye(M.shape[0])
    out = term.copy()
    for k in range(1, 300):
        term = term @ A / k
        out += term
        if np.max(np.abs(term)) < cutoff:
            break
    return out


class TestMatrixExp:
    def test_zero(self):
        assert np.array_equal(matrix_exp(np.zeros((3, 3)), 7.0), np.eye(3))

    def test_nilpotent_closed_form(self):
        M = np.array([[0.0, 1.0], [0.0, 0.0]])
        assert np.allclose(matrix_exp(M, 1.0), [[1, 1], [0, 1]], atol=1e-15)

    def test_against_taylor_oracle(self):
        M = jacobian(barebones(1, 3, 0.6, "invasion"), (1.0, 0.0))
        got = matrix_exp(M, 0.5)
        ref = taylor_exp(M, 0.5)
        assert np.max(np.abs(got - ref)) <= 1e-12 * np.max(np.abs(ref))

    def test_large_norm_scaling(self, rng):
        M = rng.normal(size=(4, 4)) * 3
        got = matrix_exp(M, 2.0)
        ref = taylor_exp(M / 16, 2.0)
        for _ in range(4):
            ref = ref @ ref
        assert np.max(np.abs(got - ref)) <= 1e-10 * np.max(np.abs(ref))

    def test_semigroup_property(self, rng):
        for _ in range(10):
            M = rng.normal(size=(3, 3))
            M -= (np.max(np.linalg.eigvals(M).real) + 0.2) * np.eye(3)  # stable
            s, t = rng.uniform(0, 2, 2)
            whole = matrix_exp(M, s + t)
            parts = matrix_exp(M, s) @ matrix_exp(M, t)
            assert np.linalg.norm(whole - parts) <= 1e-10 * np.linalg.norm(whole)

    def test_infinite_time_rejected(self):
        with pytest.raises(ValueError):
            matrix_exp(np.eye(2), np.inf)


class TestStability:
    def test_scalar_stable(self):
        rep = stability_check(np.array([[-1.0]]))
        assert rep.stable and rep.kappa == pytest.approx(1.0)

    def test_rotation_not_stable(self):
        rep = stability_check(np.array([[0.0, 1.0], [-1.0, 0.0]]))
        assert not rep.stable
        assert rep.max_real_part == pytest.approx(0.0, abs=1e-12)
        assert rep.kappa == 0.0

    def test_extinction_phase_decay(self):
        rep = stability_check(np.array([[-3.0]]))
        assert rep.stable and rep.kappa == pytest.approx(3.0)
