import numpy as np
import pytest

from rsmimo.phase_noise import (CLO, SLO, OscillatorConfig, PhaseNoiseError,
                                attenuation_factor, concentrated_trace_modulus,
                                increment_variance, normalized_trace_limit,
                                relative_rotation_diagonal, rotation_diagonal,
                                simulate_trace)


def test_increment_variance_formula():
    f_c, c, T_s = 2e9, 1e-17, 1e-7
    assert np.isclose(increment_variance(f_c, c, T_s),
                      4.0 * np.pi ** 2 * f_c * c * T_s)


def test_config_validation():
    with pytest.raises(PhaseNoiseError):
        OscillatorConfig(setup="both")
    with pytest.raises(PhaseNoiseError):
        OscillatorConfig(sigma_phi_sq=-1.0)


def test_trace_shapes_and_origin():
    rng = np.random.default_rng(1)
    clo = simulate_trace(OscillatorConfig(CLO, 1e-4, 1e-4), M=8, K=2, T=50, rng=rng)
    slo = simulate_trace(OscillatorConfig(SLO, 1e-4, 1e-4), M=8, K=2, T=50, rng=rng)
    assert clo.bs.shape == (1, 51)
    assert slo.bs.shape == (8, 51)
    assert clo.ue.shape == (2, 51)
    assert np.all(clo.bs[:, 0] == 0) and np.all(clo.ue[:, 0] == 0)
    assert clo.bs_phases().shape == (8, 51)
    # CLO rows identical after broadcast
    assert np.all(clo.bs_phases()[0] == clo.bs_phases()[5])


def test_increment_statistics():
    rng = np.random.default_rng(7)
    var = 1e-3
    trace = simulate_trace(OscillatorConfig(SLO, var, 0.0), M=64, K=1, T=400, rng=rng)
    steps = np.diff(trace.bs, axis=1).ravel()
    n = steps.size
    emp = np.var(steps)
    # chi-square concentration: relative error ~ sqrt(2/n)
    assert abs(emp - var) / var < 5.0 * np.sqrt(2.0 / n)


def test_rotation_unitarity():
    rng = np.random.default_rng(2)
    trace = simulate_trace(OscillatorConfig(SLO, 1e-4, 1e-4), 4, 2, 20, rng)
    d = rotation_diagonal(trace, 1, 7)
    assert np.allclose(np.abs(d), 1.0)
    rel = relative_rotation_diagonal(trace, 1, 9, 3)
    assert np.allclose(np.abs(rel), 1.0)
    assert np.allclose(relative_rotation_diagonal(trace, 0, 5, 5), 1.0)
    with pytest.raises(PhaseNoiseError):
        relative_rotation_diagonal(trace, 0, 2, 5)


def test_attenuation_modes():
    cfg_clo = OscillatorConfig(CLO, 2e-4, 3e-4)
    cfg_slo = OscillatorConfig(SLO, 2e-4, 3e-4)
    el = np.array([0.0, 10.0, 100.0])
    assert np.allclose(normalized_trace_limit(cfg_clo, el),
                       np.exp(-0.5 * 5e-4 * el))
    assert np.allclose(normalized_trace_limit(cfg_slo, el),
                       np.exp(-0.5 * 5e-4 * el))
    # per realization the shared-oscillator drift is a scalar phase
    assert np.allclose(concentrated_trace_modulus(cfg_clo, el), 1.0)
    assert np.allclose(concentrated_trace_modulus(cfg_slo, el),
                       np.exp(-0.5 * 2e-4 * el))
    with pytest.raises(PhaseNoiseError):
        attenuation_factor(cfg_clo, el, "other")


def test_trace_average_concentrates():
    """(1/M) sum_m e^{-j drift_m} approaches the expectation factor."""
    rng = np.random.default_rng(23)
    var = 5e-3
    cfg = OscillatorConfig(SLO, var, 0.0)
    M, T, reps = 256, 60, 40
    acc = 0.0
    for _ in range(reps):
        trace = simulate_trace(cfg, M, 1, T, rng)
        drift = trace.bs[:, T] - trace.bs[:, 10]
        acc += np.mean(np.exp(-1j * drift))
    avg = acc / reps
    expect = np.exp(-0.5 * var * (T - 10))
    assert abs(avg - expect) < 0.02
