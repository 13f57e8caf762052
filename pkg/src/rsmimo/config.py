# Scenario configuration, validation and figure presets.
import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np


class ConfigError(ValueError):
    pass


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass
class SystemConfig:
    """All scenario parameters for one simulation run.

    Powers are linear SNRs against unit noise variance (snr_db, rho_up_db);
    pn_variance is the per-sample Wiener increment variance used for both
    the BS and the UE oscillators (treated as a variance, not a standard
    deviation).
    """
    M: int = 100
    K: int = 2
    tau: int = 2
    T: int = 500
    snr_db: tuple = (-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0)
    rho_up_db: float = 2.0
    sigma_bs_sq: float = 1.0
    sigma_ue_sq: float = 1.0
    setup: str = "clo"                    # "clo" | "slo"
    pn_enabled: bool = True
    pn_variance: float = 1e-4
    oscillator_physical: tuple | None = None  # (f_c, c_bs, c_ue, T_s)
    csit: str = "imperfect"               # "imperfect" | "perfect" | "ideal"
    rzf_alpha_mode: str | float = "classical"
    include_diag: bool = True
    renormalize_fc: bool = True
    t_mode: str = "prop2"                 # "prop2" | "exhaustive" | "fixed"
    t_fixed: float = 1.0
    t_reduce: str = "harmonic"            # "harmonic" | "mean" | "max"
    qjk_variant: str = "printed"          # "printed" | "corrected"
    common_de_mode: str = "gaussian"      # "gaussian" | "mean"
    de_pn_mode: str = "expectation"       # "expectation" | "sampled"
    delta_anchor: str = "estimate"        # "estimate" | "origin"
    q_mode: str = "mc"                    # "mc" | "de"
    blocks: int = 1000
    seed: int = 20240
    slot_stride: int = 1
    shadow_var: float = 3.16
    cell_side: float = 250.0
    fixed_first_distance: float | None = 25.0
    normalize_gain: bool = True
    scenario: str = "custom"

    def validate(self) -> "SystemConfig":
        if self.M < 1 or self.K < 1:
            raise ConfigError("M and K must be >= 1")
        if self.tau < self.K:
            raise ConfigError(f"need tau >= K, got tau={self.tau}, K={self.K}")
        if self.T <= self.tau:
            raise ConfigError("T must exceed tau")
        if self.blocks < 1:
            raise ConfigError("blocks must be >= 1")
        if len(tuple(self.snr_db)) == 0:
            raise ConfigError("snr_db must be non-empty")
        if self.pn_variance < 0:
            raise ConfigError("pn_variance must be >= 0")
        if self.sigma_bs_sq <= 0 or self.sigma_ue_sq <= 0:
            raise ConfigError("noise powers must be > 0")
        if self.setup not in ("clo", "slo"):
            raise ConfigError(f"setup must be clo|slo, got {self.setup!r}")
        if self.csit not in ("imperfect", "perfect", "ideal"):
            raise ConfigError(f"csit must be imperfect|perfect|ideal, got {self.csit!r}")
        if self.t_mode not in ("prop2", "exhaustive", "fixed"):
            raise ConfigError(f"unknown t_mode {self.t_mode!r}")
        if self.t_mode == "fixed" and not 0 < self.t_fixed <= 1:
            raise ConfigError("t_fixed must lie in (0, 1]")
        if self.t_reduce not in ("harmonic", "mean", "max"):
            raise ConfigError(f"unknown t_reduce {self.t_reduce!r}")
        if self.qjk_variant not in ("printed", "corrected"):
            raise ConfigError(f"unknown qjk_variant {self.qjk_variant!r}")
        if self.common_de_mode not in ("gaussian", "mean"):
            raise ConfigError(f"unknown common_de_mode {self.common_de_mode!r}")
        if self.de_pn_mode not in ("expectation", "sampled"):
            raise ConfigError(f"unknown de_pn_mode {self.de_pn_mode!r}")
        if self.delta_anchor not in ("estimate", "origin"):
            raise ConfigError(f"unknown delta_anchor {self.delta_anchor!r}")
        if self.q_mode not in ("mc", "de"):
            raise ConfigError(f"unknown q_mode {self.q_mode!r}")
        if self.slot_stride < 1:
            raise ConfigError("slot_stride must be >= 1")
        if isinstance(self.rzf_alpha_mode, str):
            if self.rzf_alpha_mode != "classical":
                raise ConfigError("rzf_alpha_mode must be 'classical' or a number")
        elif float(self.rzf_alpha_mode) <= 0:
            raise ConfigError("fixed rzf alpha must be > 0")
        return self

    @property
    def rho_up(self) -> float:
        return db_to_linear(self.rho_up_db)

    @property
    def rho_values(self) -> np.ndarray:
        return np.array([db_to_linear(s) for s in self.snr_db])

    @property
    def bs_variance(self) -> float:
        return self.pn_variance if self.pn_enabled else 0.0

    @property
    def ue_variance(self) -> float:
        return self.pn_variance if self.pn_enabled else 0.0

    def replace(self, **kwargs) -> "SystemConfig":
        return dataclasses.replace(self, **kwargs).validate()

    def to_flat_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["snr_db"] = list(self.snr_db)
        return d

    @classmethod
    def from_flat_dict(cls, data: dict) -> "SystemConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data)
        if isinstance(cfg.snr_db, list):
            cfg.snr_db = tuple(cfg.snr_db)
        return cfg.validate()

    @classmethod
    def from_file(cls, path) -> "SystemConfig":
        with open(path) as fh:
            return cls.from_flat_dict(json.load(fh))

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_flat_dict(), fh, indent=2, sort_keys=True)


#: Sweep of the per-sample increment variance used by the total-PN figures.
DELTA_SWEEP = tuple(float(v) for v in np.logspace(-5, -3, 9))


def preset(name: str, **overrides) -> SystemConfig:
    """Named figure-reproduction presets."""
    base = {
        "fig1": dict(M=100, K=2, tau=2, T=500, pn_variance=1e-4, scenario="fig1"),
        "fig2": dict(M=20, K=2, tau=2, T=500, pn_variance=1e-4, scenario="fig2"),
        "fig3": dict(M=100, K=2, tau=2, T=100, pn_variance=1e-4, scenario="fig3"),
        "fig4": dict(M=100, K=2, tau=2, T=500, snr_db=(5.0,), scenario="fig4"),
        "fig5": dict(M=100, K=2, tau=2, T=500, snr_db=(25.0,), scenario="fig5"),
    }
    if name not in base:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(base)}")
    params = dict(base[name])
    params.update(overrides)
    return SystemConfig(**params).validate()
