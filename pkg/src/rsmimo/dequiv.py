# Large-system fixed points and closed-form SINR/rate evaluation for the
# RZF downlink with imperfect CSIT and oscillator phase drift.
#
# Conventions: all resolvent quantities are normalized so that
# T = ((1/M) sum_j R_hat_j / (1 + delta_j) + S + a_tilde I)^{-1} is O(1),
# delta_k = (1/M) tr(R_hat_k T). The derivative systems (delta', delta'')
# are K x K linear solves, not nested iterations.
from dataclasses import dataclass, field

import numpy as np


class FixedPointError(RuntimeError):
    pass


def _trace_prod(A: np.ndarray, B: np.ndarray) -> float:
    return float(np.real(np.sum(A * B.T)))


def solve_delta(R_hat: np.ndarray, S: np.ndarray | None, a_tilde: float,
                tol: float = 1e-10, max_iter: int = 10_000):
    """Solve the resolvent fixed point; returns (delta [K], T [M, M]).

    Damped (0.5) updates kick in when the residuals alternate in sign.
    """
    K, M, _ = R_hat.shape
    if a_tilde <= 0 and S is None:
        raise FixedPointError("need a_tilde > 0 or a positive definite S")
    base = (S if S is not None else 0.0) + a_tilde * np.eye(M)
    delta = np.full(K, 1.0 / a_tilde if a_tilde > 0 else 1.0)
    prev_res = None
    damping = 1.0
    for it in range(max_iter):
        A = base + np.sum(R_hat / (1.0 + delta)[:, None, None], axis=0) / M
        T = np.linalg.inv(A)
        new = np.array([_trace_prod(R_hat[k], T) / M for k in range(K)])
        res = new - delta
        if prev_res is not None and np.any(res * prev_res < 0):
            damping = 0.5
        delta_next = delta + damping * res
        if np.max(np.abs(res) / np.maximum(np.abs(delta_next), 1e-300)) < tol:
            delta = delta_next
            A = base + np.sum(R_hat / (1.0 + delta)[:, None, None], axis=0) / M
            return delta, np.linalg.inv(A)
        delta, prev_res = delta_next, res
    raise FixedPointError(
        f"fixed point did not converge in {max_iter} iterations "
        f"(last residual {np.max(np.abs(res)):.3e})")


def solve_delta_prime(R_hat: np.ndarray, T: np.ndarray, delta: np.ndarray,
                      K_mat: np.ndarray):
    """Derivative system for a perturbation direction K_mat.

    Returns (delta_deriv [K], T_deriv [M, M]) satisfying
    T' = T (K_mat + (1/M) sum_j R_hat_j delta'_j / (1+delta_j)^2) T and
    delta'_k = (1/M) tr(R_hat_k T'), via a direct K x K linear solve.
    """
    K, M, _ = R_hat.shape
    TK = T @ K_mat @ T
    c = np.array([_trace_prod(R_hat[k], TK) / M for k in range(K)])
    coupling = np.empty((K, K))
    TR = np.array([T @ R_hat[j] @ T for j in range(K)])
    for k in range(K):
        for j in range(K):
            coupling[k, j] = _trace_prod(R_hat[k], TR[j]) / (M * M * (1.0 + delta[j]) ** 2)
    deriv = np.linalg.solve(np.eye(K) - coupling, c)
    correction = np.sum(R_hat * (deriv / (1.0 + delta) ** 2)[:, None, None], axis=0) / M
    T_deriv = TK + T @ correction @ T
    residual = np.max(np.abs(deriv - np.array(
        [_trace_prod(R_hat[k], T_deriv) / M for k in range(K)])))
    if residual > 1e-9 * max(1.0, np.max(np.abs(deriv))):
        raise FixedPointError(f"derivative system residual {residual:.3e}")
    return deriv, T_deriv


@dataclass
class DeSolution:
    """Converged fixed-point quantities for one scenario/SNR point."""
    R_hat: np.ndarray
    R_full: np.ndarray
    S: np.ndarray
    a_tilde: float
    delta: np.ndarray
    T: np.ndarray
    delta_prime: np.ndarray
    T_prime: np.ndarray
    # delta_ddot[k, j] = (1/M) tr(R_hat_k T''_j) with T''_j the derivative
    # resolvent in direction R_hat_j; d_full[k, j] uses the full covariance
    # R_k in the trace (the estimation error contributes to interference).
    delta_ddot: np.ndarray
    d_full: np.ndarray
    lam_bar: float
    m_bar: np.ndarray
    residual: float
    # Second-moment trace tables feeding the fluctuation-aware common-rate
    # model: tr_hh[k, j] = tr(R_hat_k R_hat_j), tr_fh[k, j] = tr(R_k R_hat_j).
    tr_hh: np.ndarray = None
    tr_fh: np.ndarray = None
    iterations: int = 0

    @property
    def num_users(self) -> int:
        return self.R_hat.shape[0]

    @property
    def num_antennas(self) -> int:
        return self.R_hat.shape[1]

    def to_jsonable(self) -> dict:
        return {
            "a_tilde": self.a_tilde,
            "delta": self.delta.tolist(),
            "delta_prime": self.delta_prime.tolist(),
            "delta_ddot": self.delta_ddot.tolist(),
            "d_full": self.d_full.tolist(),
            "lam_bar": self.lam_bar,
            "m_bar": self.m_bar.tolist(),
            "residual": self.residual,
        }


def solve_de(R_hat: np.ndarray, R_full: np.ndarray | None = None,
             S: np.ndarray | None = None, a_tilde: float = 1.0,
             tol: float = 1e-10) -> DeSolution:
    """Solve every fixed point needed by the SINR formulas."""
    K, M, _ = R_hat.shape
    if R_full is None:
        R_full = R_hat
    delta, T = solve_delta(R_hat, S, a_tilde, tol=tol)
    delta_prime, T_prime = solve_delta_prime(R_hat, T, delta, np.eye(M))
    delta_ddot = np.empty((K, K))
    d_full = np.empty((K, K))
    for j in range(K):
        _, T_ddot_j = solve_delta_prime(R_hat, T, delta, R_hat[j])
        for k in range(K):
            delta_ddot[k, j] = _trace_prod(R_hat[k], T_ddot_j) / M
            d_full[k, j] = _trace_prod(R_full[k], T_ddot_j) / M
    tr_hh = np.empty((K, K))
    tr_fh = np.empty((K, K))
    for k in range(K):
        for j in range(K):
            tr_hh[k, j] = _trace_prod(R_hat[k], R_hat[j])
            tr_fh[k, j] = _trace_prod(R_full[k], R_hat[j])
    lam_bar = K / (np.sum(delta_prime / (1.0 + delta) ** 2) / M)
    base = (S if S is not None else 0.0) + a_tilde * np.eye(M)
    A = base + np.sum(R_hat / (1.0 + delta)[:, None, None], axis=0) / M
    residual = float(np.linalg.norm(np.linalg.inv(T) - A))
    m_bar = np.array([float(np.real(np.trace(R_hat[k]))) for k in range(K)])
    return DeSolution(R_hat=R_hat, R_full=R_full,
                      S=S if S is not None else np.zeros((M, M)),
                      a_tilde=a_tilde, delta=delta, T=T,
                      delta_prime=delta_prime, T_prime=T_prime,
                      delta_ddot=delta_ddot, d_full=d_full,
                      lam_bar=float(lam_bar), m_bar=m_bar, residual=residual,
                      tr_hh=tr_hh, tr_fh=tr_fh)


def compute_Q(de: DeSolution, theta, variant: str = "corrected") -> np.ndarray:
    """Cross-interference table, shape [..., K, K] with Q[..., j, k].

    theta is the (possibly slot-dependent) phase-drift attenuation factor;
    only its squared modulus enters the corrected variant.

    variant="corrected": the interference power of stream j at user k is
    Q_jk / (M (1 + delta_j)^2) with
        Q_jk = d_kj + |theta|^2 delta_k^2 dd_kj / (1+delta_k)^2
                    - 2 |theta|^2 delta_k dd_kj / (1+delta_k),
    where dd_kj = (1/M) tr(R_hat_k T''_j) and d_kj uses the full R_k.

    variant="printed" keeps an alternate bookkeeping of the same table,
    including its extra 1/M factors; it is retained for comparison only.
    """
    theta = np.asarray(theta, dtype=complex)
    K = de.num_users
    M = de.num_antennas
    delta = de.delta
    t2 = np.abs(theta) ** 2
    shape = theta.shape + (K, K)
    Q = np.empty(shape)
    if variant == "corrected":
        for j in range(K):
            for k in range(K):
                Q[..., j, k] = (de.d_full[k, j]
                                + t2 * delta[k] ** 2 * de.delta_ddot[k, j]
                                / (1.0 + delta[k]) ** 2
                                - 2.0 * t2 * delta[k] * de.delta_ddot[k, j]
                                / (1.0 + delta[k]))
    elif variant == "printed":
        dd = np.diag(de.delta_ddot)  # delta''_k per the single-index notation
        for j in range(K):
            for k in range(K):
                Q[..., j, k] = (dd[j] / M
                                + np.abs(dd[k]) ** 2 * dd[k] / (M * (1.0 + delta[j]) ** 2)
                                - 2.0 * np.real(theta * delta[k] * dd[k])
                                / (M * (1.0 + delta[j])))
    else:
        raise ValueError(f"unknown Q variant {variant!r}")
    return Q


def private_interference(de: DeSolution, Q: np.ndarray) -> np.ndarray:
    """Per-unit-power interference at user k: sum_{j != k} Q_jk / (M (1+delta_j)^2).

    Q has shape [..., K, K]; the result has shape [..., K].
    """
    K, M = de.num_users, de.num_antennas
    w = 1.0 / (M * (1.0 + de.delta) ** 2)
    total = np.einsum("...jk,j->...k", Q, w)
    own = Q[..., np.arange(K), np.arange(K)] * w
    return total - own


def de_sinr_private(de: DeSolution, theta, power: float, sigma_ue_sq: float,
                    variant: str = "corrected") -> np.ndarray:
    """DE of the private-stream SINR per user; theta may be an array over slots.

    power is the per-user stream power (rho t / K for rate splitting,
    rho / K for conventional broadcasting). Returns shape theta.shape + (K,).
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=complex))
    Q = compute_Q(de, theta, variant)
    interference = private_interference(de, Q)
    signal = (np.abs(theta)[..., None] ** 2
              * (de.delta / (1.0 + de.delta)) ** 2)[..., :]
    num = power * de.lam_bar * signal
    den = power * de.lam_bar * interference + sigma_ue_sq
    return num / den


def de_sinr_common(de: DeSolution, theta, coefficients: np.ndarray,
                   rho_c: float, private_power: float, sigma_ue_sq: float,
                   variant: str = "corrected",
                   renormalize: bool = True) -> np.ndarray:
    """DE of the common-message SINR at each user, shape theta.shape + (K,).

    The common precoder is sum_k alpha_k g_hat_k scaled to unit norm, so the
    beamforming gain at user k is (alpha_k |theta| tr R_hat_k)^2 divided by
    the DE of the squared norm sum_j alpha_j^2 tr R_hat_j. All K private
    streams count as interference.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=complex))
    coefficients = np.asarray(coefficients, dtype=float)
    Q = compute_Q(de, theta, variant)
    interference = private_interference(de, Q)
    own = (np.abs(theta)[..., None] ** 2
           * (de.delta / (1.0 + de.delta)) ** 2)
    norm_sq = float(np.sum(coefficients ** 2 * de.m_bar)) if renormalize else 1.0
    gain = (np.abs(theta)[..., None] * coefficients * de.m_bar) ** 2 / norm_sq
    num = rho_c * gain
    den = private_power * de.lam_bar * (own + interference) + sigma_ue_sq
    return num / den


def common_rate_gaussian(de: DeSolution, theta, coefficients: np.ndarray,
                         rho_c: float, private_power: float,
                         sigma_ue_sq: float, variant: str = "corrected",
                         norm_points: int = 32, grid_points: int = 200,
                         theta_points: int = 12) -> np.ndarray:
    """Fluctuation-aware common-message rate per slot, E[log2(1 + min_k SINR_k)].

    The plain closed form evaluates log2(1 + SINR) at the mean beamforming
    gain, which overstates the rate when the per-antenna gains are heavy
    tailed: the realized gain then keeps exponential-scale fluctuations at
    any array size, and both Jensen's inequality and the min over users pull
    the achieved rate well below the mean-SINR value.

    Model: condition on the estimated channel norms r_k = ||g_hat_k||^2,
    each a weighted chi-square approximated by a moment-matched Gamma
    (shape tr^2 R_hat_k / tr R_hat_k^2). Given r, the common precoder norm
    is N^2 = sum_j alpha_j^2 r_j and the inner product g_k^H f_c is complex
    Gaussian with

        mu_k^2 = |theta|^2 alpha_k^2 r_k^2 / N^2
        nu_k   = [2 (1 - |theta|^2) alpha_k^2 tr(R_hat_k^2)
                  + sum_{j != k} alpha_j^2 tr(R_k R_hat_j)
                  + alpha_k^2 tr((R_k - R_hat_k) R_hat_k)] / N^2,

    so |g_k^H f_c|^2 is noncentral chi-square with 2 degrees of freedom.
    Users are independent given r and E[log2(1 + min)] follows from the
    tail product on a log grid; the interference-plus-noise denominator is
    the same deterministic quantity as in de_sinr_common. The slot
    dependence enters only through |theta|^2, so the rate is evaluated on
    theta_points attenuation values and interpolated across slots.
    Returns shape theta.shape (bit/s/Hz per channel use).
    """
    from scipy.stats import gamma as gamma_dist, ncx2

    theta = np.atleast_1d(np.asarray(theta, dtype=complex))
    coefficients = np.asarray(coefficients, dtype=float)
    if rho_c <= 0:
        return np.zeros(theta.shape)
    K = de.num_users
    t2_slots = np.abs(theta) ** 2
    a2 = coefficients ** 2
    tr = de.m_bar
    tr2 = np.diag(de.tr_hh)
    err = np.array([de.tr_fh[k, k] - de.tr_hh[k, k] for k in range(K)])
    cross = np.array([np.sum(a2 * de.tr_fh[k]) - a2[k] * de.tr_fh[k, k]
                      for k in range(K)])

    # Gamma quadrature nodes for the per-user norm distributions. The grid
    # is a K-fold tensor product, so cap the total size as K grows.
    norm_points = max(6, min(norm_points, int(round(1024.0 ** (1.0 / K)))))
    shape = tr ** 2 / tr2
    scale = tr2 / tr
    qs = (np.arange(norm_points) + 0.5) / norm_points
    nodes = np.array([gamma_dist.ppf(qs, shape[k], scale=scale[k])
                      for k in range(K)])                    # [K, Ng]
    grids = np.meshgrid(*nodes, indexing="ij")               # K x [Ng,...,Ng]
    r = np.stack(grids, axis=-1)                             # [Ng^K, ..., K]
    N2 = np.sum(a2 * r, axis=-1)

    def rate_at(t2: float) -> float:
        mu2 = t2 * a2 * r ** 2 / N2[..., None]
        nu = (2.0 * (1.0 - t2) * a2 * tr2 + cross + a2 * err) / N2[..., None]
        nu = np.maximum(nu, 1e-12 * (mu2 + 1.0))
        Q = compute_Q(de, np.sqrt(t2), variant)
        interference = private_interference(de, Q)
        own = t2 * (de.delta / (1.0 + de.delta)) ** 2
        den = private_power * de.lam_bar * (own + interference) + sigma_ue_sq
        s = rho_c / den                                      # [K]
        top = np.log1p(np.max(s * (mu2 + 2.0 * nu))) + 8.0
        w = np.linspace(0.0, top, grid_points)
        u = np.expm1(w)
        x = 2.0 * u[..., None] / (s * nu)[..., None, :]
        nc = (2.0 * mu2 / nu)[..., None, :]
        tail = np.prod(ncx2.sf(x, 2, nc), axis=-1)
        return float(np.mean(np.trapezoid(tail, w, axis=-1))) / np.log(2.0)

    lo, hi = float(np.min(t2_slots)), float(np.max(t2_slots))
    if hi - lo < 1e-12:
        return np.full(theta.shape, rate_at(lo))
    pts = np.linspace(lo, hi, theta_points)
    vals = np.array([rate_at(p) for p in pts])
    return np.interp(t2_slots, pts, vals)


def de_q_weights(de: DeSolution, theta_ref, private_power: float,
                 sigma_ue_sq: float, variant: str = "corrected") -> np.ndarray:
    """Common-precoder weights q_k: inverse DE interference-plus-noise at user k."""
    theta_ref = np.asarray(theta_ref, dtype=complex)
    Q = compute_Q(de, theta_ref, variant)
    interference = private_interference(de, Q)
    own = np.abs(theta_ref) ** 2 * (de.delta / (1.0 + de.delta)) ** 2
    den = private_power * de.lam_bar * (own + interference) + sigma_ue_sq
    return 1.0 / den
