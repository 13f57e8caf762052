import numpy as np
import pytest

from rsmimo.channel import CovarianceProfile, draw_channel
from rsmimo.phase_noise import OscillatorConfig, SLO, simulate_trace
from rsmimo.rates import (RateError, accumulate_rates, cross_powers,
                          effective_channel, sinr_nors, sinr_rs)


def test_cross_powers_manual():
    G = np.array([[1.0, 0.0], [0.0, 2.0]], dtype=complex)
    F = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex)
    P = cross_powers(G, F)
    assert np.allclose(P, [[1.0, 1.0], [4.0, 4.0]])


def test_sinr_nors_manual():
    P = np.array([[4.0, 1.0], [0.5, 9.0]])
    lam, p, sig = 2.0, 0.5, 1.0
    got = sinr_nors(P, lam, p, sig)
    want = np.array([lam * p * 4.0 / (lam * p * 1.0 + 1.0),
                     lam * p * 9.0 / (lam * p * 0.5 + 1.0)])
    assert np.allclose(got, want)


def test_sinr_rs_common_counts_all_private_streams():
    P = np.array([[4.0, 1.0], [0.5, 9.0]])
    Pc = np.array([2.0, 3.0])
    lam, rho_c, p, sig = 2.0, 6.0, 0.5, 1.0
    out = sinr_rs(P, Pc, lam, rho_c, p, sig)
    want0 = rho_c * 2.0 / (lam * p * 5.0 + 1.0)
    want1 = rho_c * 3.0 / (lam * p * 9.5 + 1.0)
    assert np.allclose(out.common_per_user, [want0, want1])
    assert np.isclose(out.common, min(want0, want1))
    assert np.allclose(out.private, sinr_nors(P, lam, p, sig))


def test_effective_channel_norm_preserving():
    cov = CovarianceProfile.from_diagonals(np.array([[1.0, 2.0, 0.5]]))
    rng = np.random.default_rng(0)
    block = draw_channel(cov, rng)
    trace = simulate_trace(OscillatorConfig(SLO, 1e-3, 1e-3), 3, 1, 10, rng)
    g = effective_channel(block, trace, 0, 7, 2)
    assert np.isclose(np.linalg.norm(g), np.linalg.norm(block.H[:, 0]))
    with pytest.raises(RateError):
        effective_channel(block, trace, 0, 1, 2)


def test_accumulate_rates_prefactor():
    T = 100
    nors = np.full((98, 2), 1.0)   # log2(2) = 1 per slot
    priv = np.full((98, 2), 3.0)   # log2(4) = 2 per slot
    common = np.full(98, 0.0)
    rep = accumulate_rates(nors, priv, common, T, t=0.5)
    assert np.allclose(rep.nors_per_user, 98 / 100)
    assert np.allclose(rep.private_per_user, 2 * 98 / 100)
    assert rep.common == 0.0
    assert np.isclose(rep.rs_sum, 2 * 2 * 98 / 100)
    assert np.isclose(rep.delta_r, rep.rs_sum - rep.nors_sum)
    row = rep.to_row()
    assert set(row) == {"rate_nors", "rate_rs", "rate_common",
                        "rate_private_sum", "t"}


def test_accumulate_rates_slot_weight():
    # evaluating every 2nd slot with weight 2 matches the full evaluation
    nors = np.full((10, 1), 1.0)
    rep_full = accumulate_rates(nors, nors, np.zeros(10), 20, 1.0)
    rep_half = accumulate_rates(nors[::2], nors[::2], np.zeros(5), 20, 1.0,
                                slot_weight=2.0)
    assert np.isclose(rep_full.nors_sum, rep_half.nors_sum)
    assert rep_half.data_slots == 10
