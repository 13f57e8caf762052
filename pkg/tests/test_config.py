import json

import numpy as np
import pytest

from rsmimo.config import (ConfigError, DELTA_SWEEP, SystemConfig,
                           db_to_linear, preset)


def test_db_to_linear():
    assert np.isclose(db_to_linear(0.0), 1.0)
    assert np.isclose(db_to_linear(20.0), 100.0)


def test_default_config_valid():
    SystemConfig().validate()


@pytest.mark.parametrize("bad", [
    dict(tau=1, K=2),
    dict(T=2, tau=2),
    dict(blocks=0),
    dict(snr_db=()),
    dict(pn_variance=-1e-4),
    dict(setup="dual"),
    dict(csit="oracle"),
    dict(t_mode="random"),
    dict(t_mode="fixed", t_fixed=0.0),
    dict(qjk_variant="fixed"),
    dict(common_de_mode="exact"),
    dict(de_pn_mode="mixed"),
    dict(t_reduce="median"),
    dict(q_mode="hybrid"),
    dict(slot_stride=0),
    dict(rzf_alpha_mode="auto"),
    dict(rzf_alpha_mode=-1.0),
])
def test_validation_rejects(bad):
    with pytest.raises(ConfigError):
        SystemConfig(**bad).validate()


def test_file_roundtrip(tmp_path):
    cfg = SystemConfig(M=24, K=3, tau=3, snr_db=(5.0, 10.0), scenario="rt")
    path = tmp_path / "cfg.json"
    cfg.dump(path)
    again = SystemConfig.from_file(path)
    assert again == cfg


def test_unknown_key_rejected():
    with pytest.raises(ConfigError):
        SystemConfig.from_flat_dict({"n_antennas": 8})


def test_replace_validates():
    cfg = SystemConfig()
    with pytest.raises(ConfigError):
        cfg.replace(setup="triple")
    assert cfg.replace(setup="slo").setup == "slo"


def test_presets():
    assert preset("fig1").M == 100
    assert preset("fig2").M == 20
    assert preset("fig3").T == 100
    assert preset("fig4").snr_db == (5.0,)
    assert preset("fig5").snr_db == (25.0,)
    assert preset("fig1", blocks=10).blocks == 10
    with pytest.raises(ConfigError):
        preset("fig9")


def test_delta_sweep_grid():
    assert len(DELTA_SWEEP) == 9
    assert DELTA_SWEEP[0] == pytest.approx(1e-5)
    assert DELTA_SWEEP[-1] == pytest.approx(1e-3)
