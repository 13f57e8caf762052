# Uplink pilot phase under phase noise and the LMMSE channel estimator.
#
# The estimator targets the effective channel at the end of the training
# phase (time tau), which is what the downlink precoder is built from. For
# diagonal covariances the tau*M x tau*M normal equations decouple into M
# independent tau x tau systems; both the decoupled and the dense paths are
# implemented and agree.
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .channel import ChannelBlock, CovarianceProfile, standard_complex_gaussian
from .phase_noise import OscillatorConfig, PhaseTrace


class TrainingError(ValueError):
    pass


@dataclass(frozen=True)
class PilotBook:
    """Mutually orthogonal pilot sequences, shape [K, tau], |omega|^2 = rho_up."""
    omega: np.ndarray
    rho_up: float

    @property
    def num_users(self) -> int:
        return self.omega.shape[0]

    @property
    def length(self) -> int:
        return self.omega.shape[1]


def make_orthogonal_pilots(K: int, tau: int, rho_up: float) -> PilotBook:
    """Constant-modulus DFT pilots: omega[k, n] = sqrt(rho_up) e^{-2pi i k n / tau}."""
    if tau < K:
        raise TrainingError(f"need tau >= K, got tau={tau}, K={K}")
    if rho_up < 0:
        raise TrainingError("rho_up must be >= 0")
    n = np.arange(tau)
    k = np.arange(K)[:, None]
    omega = np.sqrt(rho_up) * np.exp(-2j * np.pi * k * n / tau)
    return PilotBook(omega=omega, rho_up=float(rho_up))


@dataclass
class TrainingObservation:
    """Stacked received pilot vectors; psi = [y_1^T, ..., y_tau^T]^T."""
    psi: np.ndarray
    tau: int
    M: int
    noise_var: float

    def as_matrix(self) -> np.ndarray:
        """[tau, M] view, row n = received vector at pilot time n+1."""
        return self.psi.reshape(self.tau, self.M)


def receive_training(block: ChannelBlock, trace: PhaseTrace, pilots: PilotBook,
                     sigma_bs_sq: float, rng: np.random.Generator) -> TrainingObservation:
    """Simulate the uplink pilot phase, times n = 1..tau."""
    M, K = block.H.shape
    if pilots.num_users != K:
        raise TrainingError("pilot book and channel block disagree on K")
    tau = pilots.length
    if trace.length < tau:
        raise TrainingError("phase trace shorter than the pilot phase")
    Y = np.zeros((tau, M), dtype=complex)
    phases = trace.bs_phases()
    for n in range(1, tau + 1):
        rot = np.exp(1j * (phases[:, n][None, :] + trace.ue[:, n][:, None]))  # [K, M]
        Y[n - 1] = np.sum(rot.T * block.H * pilots.omega[:, n - 1][None, :], axis=1)
    if sigma_bs_sq > 0:
        Y += np.sqrt(sigma_bs_sq) * standard_complex_gaussian(rng, (tau, M))
    return TrainingObservation(psi=Y.reshape(-1), tau=tau, M=M,
                               noise_var=float(sigma_bs_sq))


@dataclass
class ChannelEstimate:
    g_hat: np.ndarray
    R_hat: np.ndarray
    R_tilde: np.ndarray


def pilot_decay_diagonal(total_var: float, tau: int, anchor: str = "estimate") -> np.ndarray:
    """Diagonal of the pilot-time correlation decay matrix.

    anchor="estimate" correlates each pilot time n with the estimation time
    tau (entry e^{-lambda (tau - n)/2}, most recent pilot most informative);
    anchor="origin" keeps the literal e^{-lambda n / 2} ordering.
    """
    n = np.arange(1, tau + 1, dtype=float)
    if anchor == "estimate":
        lag = tau - n
    elif anchor == "origin":
        lag = n
    else:
        raise TrainingError(f"unknown anchor {anchor!r}")
    return np.exp(-0.5 * total_var * lag)


class TrainingStatistics:
    """Scenario-level second-order statistics and the LMMSE operator.

    Computed once per scenario; read-only afterwards. Exposes per-user
    estimated covariances R_hat and error covariances R_tilde = R - R_hat.
    """

    def __init__(self, pilots: PilotBook, covariances: CovarianceProfile,
                 osc: OscillatorConfig, sigma_bs_sq: float,
                 anchor: str = "estimate", force_dense: bool = False):
        if pilots.num_users != covariances.num_users:
            raise TrainingError("pilot book and covariance profile disagree on K")
        if sigma_bs_sq <= 0:
            raise TrainingError("sigma_bs_sq must be > 0 for an invertible system")
        self.pilots = pilots
        self.covariances = covariances
        self.osc = osc
        self.sigma_bs_sq = float(sigma_bs_sq)
        self.anchor = anchor
        tau, K, M = pilots.length, pilots.num_users, covariances.num_antennas
        self.tau, self.K, self.M = tau, K, M

        lam = osc.total_variance
        self.delta_tr = pilot_decay_diagonal(lam, tau, anchor)
        # X_j[u, v] = omega_{j,u} omega*_{j,v} e^{-lam |u - v| / 2}; the pilot
        # symbols already carry the sqrt(rho_up) amplitude.
        lags = np.abs(np.arange(tau)[:, None] - np.arange(tau)[None, :])
        decay = np.exp(-0.5 * lam * lags)
        self.X = np.einsum("ju,jv->juv", pilots.omega, np.conj(pilots.omega)) * decay

        self.diagonal = covariances.is_diagonal and not force_dense
        # Cross-correlation row r_k = omega_k^H Delta_k, shape [tau].
        self._rows = np.conj(pilots.omega) * self.delta_tr[None, :]

        if self.diagonal:
            diags = covariances.diagonals  # [K, M]
            # Per-antenna normal matrices S_m = sum_j lam_j^m X_j + sigma^2 I.
            S = np.einsum("jm,juv->muv", diags, self.X)
            S += self.sigma_bs_sq * np.eye(tau)[None, :, :]
            # Solve S_m x = r_k^H for every (k, m): xs[k, m] = S_m^{-1} r_k^H.
            rhs = np.broadcast_to(np.conj(self._rows)[:, None, :, None], (K, M, tau, 1))
            xs = np.linalg.solve(np.broadcast_to(S, (K, M, tau, tau)), rhs)[..., 0]
            # Operator rows a_k[m] = lam_k^m r_k S_m^{-1}, shape [K, M, tau].
            self._op = diags[:, :, None] * np.conj(xs)
            # R_hat diagonal entries: lam^2 * r S^{-1} r^H (real, >= 0).
            quad = np.real(np.einsum("kt,kmt->km", self._rows, xs))
            self.R_hat = CovarianceProfile.from_diagonals(diags ** 2 * quad).matrices
        else:
            R = covariances.matrices
            Sigma = np.zeros((tau * M, tau * M), dtype=complex)
            for j in range(K):
                Sigma += np.kron(self.X[j], R[j])
            Sigma += self.sigma_bs_sq * np.eye(tau * M)
            self._Sigma_cho = scipy.linalg.cho_factor(Sigma)
            ops = np.empty((K, M, tau * M), dtype=complex)
            R_hat = np.empty((K, M, M), dtype=complex)
            for k in range(K):
                # (omega_k^H Delta_k (x) R_k) has shape [M, tau*M]; build by blocks.
                cross = np.hstack([self._rows[k][u] * R[k] for u in range(tau)])
                sol = scipy.linalg.cho_solve(self._Sigma_cho, np.conj(cross.T))
                ops[k] = np.conj(sol.T)
                R_hat[k] = cross @ sol
                R_hat[k] = 0.5 * (R_hat[k] + np.conj(R_hat[k].T))
            self._op = ops
            self.R_hat = R_hat

        self.R_tilde = covariances.matrices - self.R_hat

    def estimate(self, obs: TrainingObservation, k: int) -> ChannelEstimate:
        """LMMSE estimate of the effective channel at time tau for user k."""
        g_hat = self.estimate_all(obs)[:, k]
        return ChannelEstimate(g_hat=g_hat, R_hat=self.R_hat[k],
                               R_tilde=self.R_tilde[k])

    def estimate_all(self, obs: TrainingObservation) -> np.ndarray:
        """Estimates for every user, shape [M, K]."""
        if obs.tau != self.tau or obs.M != self.M:
            raise TrainingError("observation dimensions do not match statistics")
        if self.diagonal:
            Y = obs.as_matrix()  # [tau, M]
            return np.einsum("kmt,tm->mk", self._op, Y)
        return np.stack([self._op[k] @ obs.psi for k in range(self.K)], axis=1)

    @property
    def R_hat_profile(self) -> CovarianceProfile:
        return CovarianceProfile(self.R_hat)


def lmmse_estimate(obs: TrainingObservation, stats: TrainingStatistics,
                   k: int) -> ChannelEstimate:
    return stats.estimate(obs, k)
