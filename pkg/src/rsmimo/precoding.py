# Private RZF precoders, the max-min common precoder, the ensemble
# normalization and the rate-splitting power split.
from dataclasses import dataclass

import numpy as np
import scipy.linalg


class PrecodingError(ValueError):
    pass


@dataclass
class PrecoderSet:
    """Precoders and powers for one block: F[:, k] = f_k, ||f_c|| = 1."""
    F: np.ndarray
    f_c: np.ndarray
    lam: float
    t: float
    rho: float

    @property
    def rho_c(self) -> float:
        return self.rho * (1.0 - self.t)

    @property
    def rho_private(self) -> float:
        """Per-user private power rho * t / K."""
        return self.rho * self.t / self.F.shape[1]


def rzf_precoder(G_hat: np.ndarray, Z: np.ndarray | None, alpha: float,
                 sigma_bs_sq: float, include_diag: bool = True) -> np.ndarray:
    """Regularized zero-forcing from the channel estimates.

    F = (W + diag(W) + Z + M alpha sigma_BS^2 I)^{-1} G_hat with
    W = G_hat G_hat^H. The diag(W) term doubles the sample diagonal loading;
    include_diag=False drops it (classical RZF).
    """
    M = G_hat.shape[0]
    W = G_hat @ np.conj(G_hat.T)
    C = W + (np.diag(np.diag(W)) if include_diag else 0.0)
    if Z is not None:
        C = C + Z
    C = C + (M * alpha * sigma_bs_sq) * np.eye(M)
    try:
        cho = scipy.linalg.cho_factor(C)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise PrecodingError("regularized matrix is singular") from exc
    return scipy.linalg.cho_solve(cho, G_hat)


def classical_alpha(M: int, K: int, rho: float, sigma_bs_sq: float) -> float:
    """Regularization making the diagonal loading M alpha sigma_BS^2 = K / rho."""
    if rho <= 0:
        raise PrecodingError("rho must be > 0")
    return K / (M * rho * sigma_bs_sq)


def normalization_lambda(precoders) -> float:
    """lambda = K / mean(tr F^H F) over an ensemble of precoder draws."""
    precoders = list(precoders)
    if not precoders:
        raise PrecodingError("empty precoder ensemble")
    K = precoders[0].shape[1]
    traces = [np.real(np.vdot(F, F)) for F in precoders]
    return ensemble_lambda(K, traces)


def ensemble_lambda(K: int, traces) -> float:
    """lambda = K / mean(tr F^H F)."""
    traces = np.asarray(traces, dtype=float)
    mean = float(np.mean(traces))
    if mean <= 0:
        raise PrecodingError("zero-energy precoder ensemble")
    return K / mean


def common_coefficients(q: np.ndarray, R_hat_traces: np.ndarray, M: int) -> np.ndarray:
    """Max-min optimal mixing weights for the common precoder.

    alpha_k = 1 / sqrt(M sum_j (q_k tr^2 R_hat_k) / (q_j tr^2 R_hat_j)),
    which equalizes q_k alpha_k^2 tr^2 R_hat_k across users and satisfies
    sum_k alpha_k^2 = 1/M. Setup-independent: a common attenuation factor
    multiplies every term and cancels in the ratios.
    """
    q = np.asarray(q, dtype=float)
    tr = np.asarray(R_hat_traces, dtype=float)
    if np.any(q <= 0):
        raise PrecodingError("q weights must be > 0")
    if np.any(tr <= 0):
        raise PrecodingError("estimated covariance traces must be > 0")
    terms = q * tr ** 2
    alpha_sq = 1.0 / (M * terms * np.sum(1.0 / terms))
    return np.sqrt(alpha_sq)


def common_precoder(G_hat: np.ndarray, coefficients: np.ndarray,
                    renormalize: bool = True) -> np.ndarray:
    """f_c = sum_k alpha_k g_hat_k, optionally renormalized to unit norm."""
    f_c = G_hat @ np.asarray(coefficients, dtype=float)
    if renormalize:
        nrm = np.linalg.norm(f_c)
        if nrm == 0:
            raise PrecodingError("common precoder has zero norm")
        f_c = f_c / nrm
    return f_c


def power_split(lam_bar: float, delta: np.ndarray, Q: np.ndarray, rho: float,
                K: int, M: int, reduce: str = "harmonic") -> float:
    """Power-splitting ratio t = min{K^2 M / (lam_bar sum_{j != k} rho Q_jk / (1+delta_j)^2), 1}.

    Q[j, k] is the cross-interference table at the reference slot. The
    formula leaves the k index of the sum dangling, so it is reduced over
    users: "harmonic" (default) is the choice under which the per-user rate
    losses sum to at most log2(e) - each user's loss is bounded by
    1/(ln2 t I_k) and the harmonic reduction makes sum_k 1/(t I_k) = 1.
    "mean" and "max" use the arithmetic mean and the worst user. A
    non-positive denominator (no interference) yields t = 1.
    """
    if rho <= 0:
        raise PrecodingError("rho must be > 0")
    delta = np.asarray(delta, dtype=float)
    Q = np.asarray(Q, dtype=float)
    weights = 1.0 / (1.0 + delta) ** 2
    sums = np.array([np.sum(Q[:, k] * weights) - Q[k, k] * weights[k]
                     for k in range(K)])
    if reduce == "max":
        denom = np.max(sums)
    elif reduce == "mean":
        denom = float(np.mean(sums))
    elif reduce == "harmonic":
        if np.any(sums <= 0):
            return 1.0
        denom = K / float(np.sum(1.0 / sums))
    else:
        raise PrecodingError(f"unknown reduce {reduce!r}")
    denom *= lam_bar * rho
    if denom <= 0:
        return 1.0
    return float(min(K ** 2 * M / denom, 1.0))
