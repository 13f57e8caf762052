# Spatial covariance construction and correlated Rayleigh channel draws.
import json
from dataclasses import dataclass, field

import numpy as np

PSD_TOL = 1e-10

# Path-loss model: gain = 10^(s - 1.53) / d^3.76 with per-antenna shadowing s.
PATHLOSS_OFFSET = -1.53
PATHLOSS_EXPONENT = 3.76
DEFAULT_SHADOW_VAR = 3.16
DEFAULT_CELL_SIDE = 250.0


class ChannelModelError(ValueError):
    pass


@dataclass(frozen=True)
class UserGeometry:
    """Per-user, per-antenna distances to the array, in meters.

    distances has shape [K, M]. All entries must be strictly positive.
    """
    distances: np.ndarray
    shadow_var: float = DEFAULT_SHADOW_VAR
    cell_side: float = DEFAULT_CELL_SIDE

    def __post_init__(self):
        d = np.asarray(self.distances, dtype=float)
        if d.ndim != 2 or d.shape[0] < 1 or d.shape[1] < 1:
            raise ChannelModelError("distances must be a [K, M] array with K, M >= 1")
        if np.any(d <= 0):
            raise ChannelModelError("all distances must be strictly positive")
        object.__setattr__(self, "distances", d)

    @property
    def num_users(self) -> int:
        return self.distances.shape[0]

    @property
    def num_antennas(self) -> int:
        return self.distances.shape[1]


def place_users(K: int, M: int, rng: np.random.Generator,
                cell_side: float = DEFAULT_CELL_SIDE,
                fixed_first: float | None = None,
                min_distance: float = 1.0,
                shadow_var: float = DEFAULT_SHADOW_VAR) -> UserGeometry:
    """Drop K users uniformly in a square cell with the array at the center.

    The array is colocated, so every antenna sees the same distance to a
    given user. fixed_first overrides the first user's distance (used by the
    figure presets, which pin one user at 25 m).
    """
    xy = rng.uniform(-cell_side / 2, cell_side / 2, size=(K, 2))
    d = np.maximum(np.hypot(xy[:, 0], xy[:, 1]), min_distance)
    if fixed_first is not None:
        d[0] = fixed_first
    return UserGeometry(np.repeat(d[:, None], M, axis=1),
                        shadow_var=shadow_var, cell_side=cell_side)


def pathloss_gain(distance, shadow=0.0):
    """Scalar large-scale gain 10^(s - 1.53) / d^3.76."""
    distance = np.asarray(distance, dtype=float)
    if np.any(distance <= 0):
        raise ChannelModelError("distance must be positive")
    return 10.0 ** (np.asarray(shadow) + PATHLOSS_OFFSET) / distance ** PATHLOSS_EXPONENT


@dataclass
class CovarianceProfile:
    """Per-user Hermitian PSD spatial covariance matrices, shape [K, M, M]."""
    matrices: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.matrices)
        if R.ndim != 3 or R.shape[1] != R.shape[2]:
            raise ChannelModelError("matrices must have shape [K, M, M]")
        if not np.allclose(R, np.conj(np.swapaxes(R, 1, 2)), atol=1e-10):
            raise ChannelModelError("covariance matrices must be Hermitian")
        self.matrices = R.astype(complex)

    @classmethod
    def from_diagonals(cls, diagonals: np.ndarray) -> "CovarianceProfile":
        diagonals = np.asarray(diagonals, dtype=float)
        K, M = diagonals.shape
        R = np.zeros((K, M, M), dtype=complex)
        idx = np.arange(M)
        R[:, idx, idx] = diagonals
        return cls(R)

    @property
    def num_users(self) -> int:
        return self.matrices.shape[0]

    @property
    def num_antennas(self) -> int:
        return self.matrices.shape[1]

    @property
    def is_diagonal(self) -> bool:
        off = self.matrices - self.diagonals[:, :, None] * np.eye(self.num_antennas)
        return bool(np.all(np.abs(off) < 1e-14))

    @property
    def diagonals(self) -> np.ndarray:
        return np.real(np.diagonal(self.matrices, axis1=1, axis2=2))

    def sqrt(self) -> np.ndarray:
        """Matrix square roots via eigendecomposition, [K, M, M].

        Eigenvalues in [-PSD_TOL, 0) are clipped to zero; anything more
        negative is treated as a genuinely indefinite matrix.
        """
        roots = np.empty_like(self.matrices)
        for k, R in enumerate(self.matrices):
            vals, vecs = np.linalg.eigh(R)
            if np.min(vals) < -PSD_TOL:
                raise ChannelModelError(
                    f"covariance of user {k} is not PSD (min eigenvalue {vals.min():.3e})")
            vals = np.clip(vals, 0.0, None)
            roots[k] = (vecs * np.sqrt(vals)) @ np.conj(vecs.T)
        return roots

    def scaled(self, factor: float) -> "CovarianceProfile":
        return CovarianceProfile(self.matrices * factor)

    def to_json(self) -> str:
        if not self.is_diagonal:
            raise ChannelModelError("only diagonal profiles are serialized")
        payload = {str(k): self.diagonals[k].tolist() for k in range(self.num_users)}
        return json.dumps(payload, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "CovarianceProfile":
        payload = json.loads(text)
        keys = sorted(payload, key=int)
        return cls.from_diagonals(np.array([payload[k] for k in keys], dtype=float))


def build_covariance(geometry: UserGeometry, rng: np.random.Generator | None = None,
                     shadow_draws: np.ndarray | None = None,
                     normalize: bool = False,
                     reference_distance: float = 25.0) -> CovarianceProfile:
    """Diagonal covariances from path loss and log-domain shadowing.

    shadow_draws ([K, M], real) overrides the N(0, shadow_var) draws; pass
    zeros for a deterministic profile. With normalize=True all gains are
    divided by the unshadowed gain at reference_distance, which puts the
    strongest user near unit gain so that transmit power doubles as SNR.
    """
    if shadow_draws is None:
        if rng is None:
            raise ChannelModelError("either rng or shadow_draws is required")
        shadow_draws = rng.normal(0.0, np.sqrt(geometry.shadow_var),
                                  size=geometry.distances.shape)
    shadow_draws = np.asarray(shadow_draws, dtype=float)
    if shadow_draws.shape != geometry.distances.shape:
        raise ChannelModelError("shadow_draws shape must match distances")
    gains = pathloss_gain(geometry.distances, shadow_draws)
    if normalize:
        gains = gains / pathloss_gain(reference_distance)
    return CovarianceProfile.from_diagonals(gains)


@dataclass
class ChannelBlock:
    """One coherence block: H[:, k] is the channel of user k."""
    H: np.ndarray
    covariance: CovarianceProfile
    index: int = 0


def draw_channel(cov: CovarianceProfile, rng: np.random.Generator,
                 index: int = 0, sqrt_cache: np.ndarray | None = None) -> ChannelBlock:
    """Draw h_k = R_k^{1/2} w_k with w_k standard circular complex Gaussian."""
    K, M = cov.num_users, cov.num_antennas
    roots = cov.sqrt() if sqrt_cache is None else sqrt_cache
    w = standard_complex_gaussian(rng, (K, M))
    H = np.einsum("kmn,kn->mk", roots, w)
    return ChannelBlock(H=H, covariance=cov, index=index)


def standard_complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """CN(0, 1) samples of the given shape."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
