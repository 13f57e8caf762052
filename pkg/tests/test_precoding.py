import numpy as np
import pytest

from rsmimo.channel import standard_complex_gaussian
from rsmimo.precoding import (PrecodingError, classical_alpha,
                              common_coefficients, common_precoder,
                              ensemble_lambda, power_split, rzf_precoder)


def _random_ghat(rng, M=16, K=3):
    return standard_complex_gaussian(rng, (M, K))


def test_rzf_solves_normal_equations():
    rng = np.random.default_rng(0)
    G = _random_ghat(rng)
    M = G.shape[0]
    alpha = 0.05
    for include_diag in (True, False):
        F = rzf_precoder(G, None, alpha, 1.0, include_diag=include_diag)
        W = G @ np.conj(G.T)
        C = W + (np.diag(np.diag(W)) if include_diag else 0.0) + M * alpha * np.eye(M)
        assert np.allclose(C @ F, G, atol=1e-10)


def test_classical_alpha_loading():
    # diagonal loading M alpha sigma^2 equals K / rho
    M, K, rho = 64, 4, 10.0
    assert np.isclose(M * classical_alpha(M, K, rho, 1.0) * 1.0, K / rho)
    with pytest.raises(PrecodingError):
        classical_alpha(M, K, 0.0, 1.0)


def test_ensemble_lambda():
    assert np.isclose(ensemble_lambda(2, [1.0, 3.0]), 1.0)
    with pytest.raises(PrecodingError):
        ensemble_lambda(2, [0.0])


def test_common_coefficients_properties():
    q = np.array([0.5, 2.0, 1.0])
    tr = np.array([10.0, 3.0, 7.0])
    M = 32
    a = common_coefficients(q, tr, M)
    assert np.isclose(np.sum(a ** 2), 1.0 / M)
    # the weighted gains q_k a_k^2 tr_k^2 are equalized
    g = q * a ** 2 * tr ** 2
    assert np.allclose(g, g[0])
    with pytest.raises(PrecodingError):
        common_coefficients(np.array([0.0, 1.0]), tr[:2], M)


def test_common_precoder_unit_norm():
    rng = np.random.default_rng(5)
    G = _random_ghat(rng)
    a = common_coefficients(np.ones(3), np.full(3, 2.0), 16)
    f = common_precoder(G, a)
    assert np.isclose(np.linalg.norm(f), 1.0)


def test_power_split_clamp_and_harmonic():
    delta = np.array([1.0, 2.0])
    Q = np.array([[0.0, 0.3], [0.5, 0.0]])
    # tiny rho: formula value exceeds one, clamps
    assert power_split(1.0, delta, Q, 1e-6, 2, 64) == 1.0
    t = power_split(1.0, delta, Q, 1e9, 2, 64, reduce="harmonic")
    # harmonic reduction makes sum_k 1/(t I_k) equal 1 when un-clamped
    w = 1.0 / (1.0 + delta) ** 2
    sums = np.array([Q[1, 0] * w[1], Q[0, 1] * w[0]])
    I = 1e9 * 1.0 / (2 * 64) * sums  # lam rho/K * sum / M
    assert np.isclose(np.sum(1.0 / (t * I)), 1.0)
    with pytest.raises(PrecodingError):
        power_split(1.0, delta, Q, 1.0, 2, 64, reduce="median")


def test_power_split_no_interference():
    delta = np.array([1.0])
    Q = np.zeros((1, 1))
    assert power_split(1.0, delta, Q, 100.0, 1, 8) == 1.0
