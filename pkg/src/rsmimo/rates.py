# Instantaneous downlink SINRs and ergodic rate accumulation for the
# conventional (NoRS) and rate-splitting strategies.
from dataclasses import dataclass

import numpy as np

from .channel import ChannelBlock
from .phase_noise import PhaseTrace, relative_rotation_diagonal


class RateError(ValueError):
    pass


def effective_channel(block: ChannelBlock, trace: PhaseTrace, k: int, n: int,
                      n0: int) -> np.ndarray:
    """Downlink effective channel g_{k,n}: the estimated-at-n0 channel rotated
    by the conjugate phase drift. Norm-preserving."""
    if n < n0:
        raise RateError(f"data slot {n} precedes the estimation time {n0}")
    g_ref = np.exp(1j * trace.total_phase(k, n0)) * block.H[:, k]
    drift = relative_rotation_diagonal(trace, k, n, n0)
    return np.conj(drift) * g_ref


def cross_powers(G: np.ndarray, F: np.ndarray) -> np.ndarray:
    """P[k, j] = |g_k^H f_j|^2 for channel columns G[:, k], precoders F[:, j]."""
    return np.abs(np.conj(G.T) @ F) ** 2


def sinr_nors(P: np.ndarray, lam: float, power: float,
              sigma_ue_sq: float) -> np.ndarray:
    """Per-user SINR with private streams only, equal per-user power.

    P[..., k, j] = |g_k^H f_j|^2; power is the per-user share. Returns
    shape [..., K].
    """
    K = P.shape[-1]
    own = P[..., np.arange(K), np.arange(K)]
    interference = np.sum(P, axis=-1) - own
    return (power * lam * own) / (lam * power * interference + sigma_ue_sq)


@dataclass
class SinrBreakdown:
    """Linear SINRs for one or more slots."""
    private: np.ndarray        # [..., K]
    common_per_user: np.ndarray  # [..., K]

    @property
    def common(self) -> np.ndarray:
        """Worst-user common SINR (the decodability constraint)."""
        return np.min(self.common_per_user, axis=-1)


def sinr_rs(P: np.ndarray, P_common: np.ndarray, lam: float, rho_c: float,
            private_power: float, sigma_ue_sq: float) -> SinrBreakdown:
    """Rate-splitting SINRs.

    P[..., k, j] = |g_k^H f_j|^2, P_common[..., k] = |g_k^H f_c|^2. The
    common message sees every private stream as interference; the private
    SINR has the NoRS form at the reduced power rho t / K.
    """
    private = sinr_nors(P, lam, private_power, sigma_ue_sq)
    total = np.sum(P, axis=-1)
    common = (rho_c * P_common) / (lam * private_power * total + sigma_ue_sq)
    return SinrBreakdown(private=private, common_per_user=common)


@dataclass
class RateReport:
    """Ergodic rates in bit/s/Hz with the 1/T block prefactor applied."""
    nors_per_user: np.ndarray
    private_per_user: np.ndarray
    common: float
    t: float
    data_slots: int
    block_length: int

    @property
    def nors_sum(self) -> float:
        return float(np.sum(self.nors_per_user))

    @property
    def private_sum(self) -> float:
        return float(np.sum(self.private_per_user))

    @property
    def rs_sum(self) -> float:
        return self.common + self.private_sum

    @property
    def delta_r(self) -> float:
        """Sum-rate payoff of rate splitting over conventional broadcasting."""
        return self.rs_sum - self.nors_sum

    def to_row(self) -> dict:
        return {
            "rate_nors": self.nors_sum,
            "rate_rs": self.rs_sum,
            "rate_common": self.common,
            "rate_private_sum": self.private_sum,
            "t": self.t,
        }


def accumulate_rates(nors_sinr: np.ndarray, private_sinr: np.ndarray,
                     common_sinr: np.ndarray, T: int, t: float,
                     slot_weight: float = 1.0) -> RateReport:
    """Average log2(1 + SINR) over the data slots with prefactor 1/T.

    The SINR arrays are indexed [slot, ...]; slot_weight compensates for
    slot subsampling (weight s when only every s-th slot is evaluated).
    """
    n_slots = nors_sinr.shape[0]
    scale = slot_weight / T
    nors = scale * np.sum(np.log2(1.0 + nors_sinr), axis=0)
    private = scale * np.sum(np.log2(1.0 + private_sinr), axis=0)
    common = float(scale * np.sum(np.log2(1.0 + common_sinr), axis=0))
    return RateReport(nors_per_user=nors, private_per_user=private,
                      common=common, t=t,
                      data_slots=int(round(n_slots * slot_weight)),
                      block_length=T)
