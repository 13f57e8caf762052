# Pilot-based channel estimation quality under phase noise.
#
# Shows the per-user normalized estimation error tr(R_tilde)/tr(R) as a
# function of the uplink pilot power, for a clean oscillator and a noisy
# one, and confirms the analytic error covariance against a short empirical
# run. Phase noise puts a floor on the achievable accuracy: past a few dB of
# pilot power the error stops falling because the phase drift between pilot
# symbols, not the thermal noise, limits coherent combining.
#
# Run:  python3 demos/estimation_quality.py
import numpy as np

from rsmimo.channel import CovarianceProfile, draw_channel
from rsmimo.phase_noise import SLO, OscillatorConfig, simulate_trace
from rsmimo.training import (TrainingStatistics, make_orthogonal_pilots,
                             receive_training)

M, K, TAU = 32, 2, 4
SIGMA = 1.0


def nmse_curve(variance: float, pilot_powers_db) -> list:
    rng = np.random.default_rng(3)
    cov = CovarianceProfile.from_diagonals(rng.lognormal(0.0, 0.5, (K, M)))
    osc = OscillatorConfig(SLO, variance, variance)
    out = []
    for p_db in pilot_powers_db:
        pilots = make_orthogonal_pilots(K, TAU, 10.0 ** (p_db / 10.0))
        stats = TrainingStatistics(pilots, cov, osc, SIGMA)
        nmse = [np.real(np.trace(stats.R_tilde[k]))
                / np.real(np.trace(cov.matrices[k])) for k in range(K)]
        out.append(float(np.mean(nmse)))
    return out


def empirical_check(variance: float, blocks: int = 2000) -> float:
    """Empirical estimate error power vs the analytic tr(R_tilde)."""
    rng = np.random.default_rng(4)
    cov = CovarianceProfile.from_diagonals(rng.lognormal(0.0, 0.5, (K, M)))
    osc = OscillatorConfig(SLO, variance, variance)
    pilots = make_orthogonal_pilots(K, TAU, 10.0 ** 0.2)
    stats = TrainingStatistics(pilots, cov, osc, SIGMA)
    err = 0.0
    for b in range(blocks):
        block = draw_channel(cov, rng, index=b)
        trace = simulate_trace(osc, M, K, TAU, rng)
        obs = receive_training(block, trace, pilots, SIGMA, rng)
        g_hat = stats.estimate_all(obs)
        # target: the effective channel at the estimation time TAU
        phases = trace.bs_phases()[:, TAU][:, None] + trace.ue[:, TAU][None, :]
        g_true = np.exp(1j * phases) * block.H
        err += float(np.sum(np.abs(g_true - g_hat) ** 2)) / K
    theory = float(np.mean([np.real(np.trace(stats.R_tilde[k]))
                            for k in range(K)]))
    return (err / blocks) / theory


def main() -> None:
    powers = np.arange(-10.0, 21.0, 5.0)
    clean = nmse_curve(0.0, powers)
    noisy = nmse_curve(1e-3, powers)
    print(f"normalized estimation error, M={M}, K={K}, tau={TAU}")
    print(f"{'pilot dB':>9} | {'no pn':>9} | {'pn 1e-3':>9}")
    for p, c, d in zip(powers, clean, noisy):
        print(f"{p:9.0f} | {c:9.4f} | {d:9.4f}")
    ratio = empirical_check(1e-3)
    print(f"\nempirical / analytic error power (2000 blocks): {ratio:.3f}")


if __name__ == "__main__":
    main()
