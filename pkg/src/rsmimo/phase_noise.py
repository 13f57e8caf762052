# Wiener phase-noise trajectories, rotation matrices and their large-array
# trace limits for CLO (one shared oscillator) and SLO (one per antenna).
from dataclasses import dataclass

import numpy as np

CLO = "clo"
SLO = "slo"


class PhaseNoiseError(ValueError):
    pass


def increment_variance(f_c: float, c: float, T_s: float) -> float:
    """Per-sample Wiener increment variance 4 pi^2 f_c c T_s."""
    if f_c < 0 or c < 0 or T_s < 0:
        raise PhaseNoiseError("carrier, oscillator constant and symbol time must be >= 0")
    return 4.0 * np.pi ** 2 * f_c * c * T_s


@dataclass(frozen=True)
class OscillatorConfig:
    """Oscillator setup and the per-sample increment variances (rad^2)."""
    setup: str = CLO
    sigma_phi_sq: float = 0.0   # BS increment variance
    sigma_vphi_sq: float = 0.0  # UE increment variance

    def __post_init__(self):
        if self.setup not in (CLO, SLO):
            raise PhaseNoiseError(f"setup must be '{CLO}' or '{SLO}', got {self.setup!r}")
        if self.sigma_phi_sq < 0 or self.sigma_vphi_sq < 0:
            raise PhaseNoiseError("increment variances must be >= 0")

    @classmethod
    def from_physical(cls, setup: str, f_c: float, c_bs: float, c_ue: float,
                      T_s: float) -> "OscillatorConfig":
        return cls(setup=setup,
                   sigma_phi_sq=increment_variance(f_c, c_bs, T_s),
                   sigma_vphi_sq=increment_variance(f_c, c_ue, T_s))

    @property
    def total_variance(self) -> float:
        return self.sigma_phi_sq + self.sigma_vphi_sq


@dataclass
class PhaseTrace:
    """Sampled phases over one block, n = 0..T (phases start at 0).

    bs has shape [M_osc, T+1] with M_osc = 1 for CLO and M for SLO;
    ue has shape [K, T+1].
    """
    config: OscillatorConfig
    bs: np.ndarray
    ue: np.ndarray
    num_antennas: int

    @property
    def length(self) -> int:
        return self.bs.shape[1] - 1

    def bs_phases(self) -> np.ndarray:
        """BS phases broadcast to [M, T+1] (CLO rows are identical)."""
        if self.bs.shape[0] == self.num_antennas:
            return self.bs
        return np.broadcast_to(self.bs, (self.num_antennas, self.bs.shape[1]))

    def total_phase(self, k: int, n: int) -> np.ndarray:
        """theta_{k,n}^{(m)} = phi_{m,n} + vphi_{k,n}, shape [M]."""
        self._check_index(n)
        return self.bs_phases()[:, n] + self.ue[k, n]

    def _check_index(self, n: int):
        if not 0 <= n <= self.length:
            raise PhaseNoiseError(f"time index {n} outside [0, {self.length}]")


def simulate_trace(cfg: OscillatorConfig, M: int, K: int, T: int,
                   rng: np.random.Generator) -> PhaseTrace:
    """Draw Wiener trajectories for one coherence block of T samples."""
    if T < 1:
        raise PhaseNoiseError("T must be >= 1")
    m_osc = 1 if cfg.setup == CLO else M
    bs = np.zeros((m_osc, T + 1))
    ue = np.zeros((K, T + 1))
    if cfg.sigma_phi_sq > 0:
        steps = rng.normal(0.0, np.sqrt(cfg.sigma_phi_sq), size=(m_osc, T))
        bs[:, 1:] = np.cumsum(steps, axis=1)
    if cfg.sigma_vphi_sq > 0:
        steps = rng.normal(0.0, np.sqrt(cfg.sigma_vphi_sq), size=(K, T))
        ue[:, 1:] = np.cumsum(steps, axis=1)
    return PhaseTrace(config=cfg, bs=bs, ue=ue, num_antennas=M)


def rotation_diagonal(trace: PhaseTrace, k: int, n: int) -> np.ndarray:
    """Diagonal of Theta_{k,n}: entries exp(j(phi_{m,n} + vphi_{k,n}))."""
    return np.exp(1j * trace.total_phase(k, n))


def rotation_matrix(trace: PhaseTrace, k: int, n: int) -> np.ndarray:
    return np.diag(rotation_diagonal(trace, k, n))


def relative_rotation_diagonal(trace: PhaseTrace, k: int, n: int,
                               n0: int) -> np.ndarray:
    """Diagonal of the drift matrix between the anchor n0 and time n.

    Entries are exp(-j(theta_{k,n}^{(m)} - theta_{k,n0}^{(m)})); identity at
    n = n0. Requires n >= n0.
    """
    if n < n0:
        raise PhaseNoiseError(f"n={n} must be >= anchor n0={n0}")
    return np.exp(-1j * (trace.total_phase(k, n) - trace.total_phase(k, n0)))


def relative_rotation(trace: PhaseTrace, k: int, n: int, n0: int) -> np.ndarray:
    return np.diag(relative_rotation_diagonal(trace, k, n, n0))


def normalized_trace_limit(cfg: OscillatorConfig, elapsed) -> np.ndarray:
    """Expected normalized trace of the drift matrix after `elapsed` samples.

    Taking the expectation over the Wiener increments gives
    exp(-(sigma_phi^2 + sigma_vphi^2) * elapsed / 2) for both oscillator
    setups; this is the fully deterministic attenuation factor used by the
    closed-form analysis in "expectation" mode.
    """
    elapsed = np.asarray(elapsed, dtype=float)
    if np.any(elapsed < 0):
        raise PhaseNoiseError("elapsed must be >= 0")
    return np.exp(-0.5 * cfg.total_variance * elapsed)


def concentrated_trace_modulus(cfg: OscillatorConfig, elapsed) -> np.ndarray:
    """Almost-sure modulus of the normalized drift trace after `elapsed` samples.

    Per realization the UE drift is a scalar phase, so it never affects the
    modulus. Under CLO the BS drift is scalar too and the modulus is exactly
    1; under SLO the average over antennas concentrates (variance O(1/M)) to
    exp(-sigma_phi^2 * elapsed / 2). This is the "sampled" attenuation mode.
    """
    elapsed = np.asarray(elapsed, dtype=float)
    if np.any(elapsed < 0):
        raise PhaseNoiseError("elapsed must be >= 0")
    if cfg.setup == CLO:
        return np.ones_like(elapsed)
    return np.exp(-0.5 * cfg.sigma_phi_sq * elapsed)


def attenuation_factor(cfg: OscillatorConfig, elapsed, mode: str) -> np.ndarray:
    """Dispatch between the expectation and sampled attenuation readings."""
    if mode == "expectation":
        return normalized_trace_limit(cfg, elapsed)
    if mode == "sampled":
        return concentrated_trace_modulus(cfg, elapsed)
    raise PhaseNoiseError(f"unknown attenuation mode {mode!r}")
