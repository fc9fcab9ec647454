import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rydberg_sps.config import PhysicalConfig, dump_config, load_config
from rydberg_sps.errors import ConfigError


def test_defaults_in_internal_units(cfg):
    assert cfg.gamma == pytest.approx(1 / 26.2)
    # 642.1 MHz um^6 as rad/ns um^6
    assert cfg.c6 == pytest.approx(2 * math.pi * 0.6421)
    assert cfg.detunings[0] == pytest.approx(-2 * math.pi * 100)
    assert cfg.liad_b == pytest.approx(0.271)


def test_thermal_spread_matches_kinetic_theory(cfg):
    # sqrt(kB T / m) for Rb-85 at 473.15 K, evaluated separately with mpmath (m/s)
    assert cfg.sigma_v * 1e3 == pytest.approx(215.2447252, rel=1e-8)
    assert round(cfg.sigma_v * 1e3, 1) == 215.2


def test_signed_wavevectors(cfg):
    k = cfg.wavevectors
    assert k[0] > 0 and k[1] < 0 and k[2] < 0
    assert cfg.k0 == pytest.approx(k[0] + k[1] - k[2])
    assert cfg.k0 == pytest.approx(7.7540, abs=1e-3)
    assert cfg.k_emit == pytest.approx(2 * math.pi / 0.780241)


@pytest.mark.parametrize("field,value", [
    ("temperature", 0.0), ("temperature", -3.0), ("cell_thickness", 0.0),
    ("lifetime_tau", float("nan")), ("rabi_threshold", 1.5),
])
def test_invalid_values_rejected(field, value):
    with pytest.raises(ConfigError):
        PhysicalConfig(**{field: value})


def test_wrong_tuple_length_rejected():
    with pytest.raises(ConfigError):
        PhysicalConfig(beam_waists=(1.0, 2.0))


def test_ini_lab_units_are_converted():
    text = """
[cell]
temperature_K = 300
[interaction]
c6_MHz_um6 = 1000
[lasers]
detuning1_GHz = -50
waist2_um = 3.5
[liad]
b_m_per_s = 300
both_walls = no
[fits]
order_interaction = 6
"""
    cfg = load_config(text)
    assert cfg.temperature == 300.0
    assert cfg.c6 == pytest.approx(2 * math.pi * 1.0)
    assert cfg.detunings == pytest.approx((-2 * math.pi * 50, 2 * math.pi * 100, 0.0))
    assert cfg.beam_waists[1] == 3.5
    assert cfg.liad_b == pytest.approx(0.3)
    assert cfg.liad_both_walls is False
    assert cfg.fit_orders[3] == 6


def test_ini_file_on_disk(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[cell]\nthickness_um = 2.5\n")
    assert load_config(path).cell_thickness == 2.5
    assert load_config(str(path)).cell_thickness == 2.5


def test_unknown_sections_are_kept():
    cfg = load_config("[pulses]\nrabi1_GHz = 12\n")
    assert cfg.extra == {"pulses": {"rabi1_GHz": "12"}}
    assert "[pulses]" in dump_config(cfg)


def test_bad_number_is_config_error():
    with pytest.raises(ConfigError):
        load_config("[cell]\ntemperature_K = warm\n")


def test_round_trip_is_exact(cfg):
    again = load_config(dump_config(cfg))
    assert again == cfg


def test_hand_edit_overrides_exact_copy(cfg):
    text = dump_config(cfg).replace("temperature_K = 473.15", "temperature_K = 400.0")
    assert load_config(text).temperature == 400.0


@settings(max_examples=40, deadline=None)
@given(temperature=st.floats(1.0, 2000.0), c6=st.floats(1.0, 5000.0),
       det=st.floats(-500.0, 500.0), waist=st.floats(0.1, 10.0))
def test_round_trip_property(temperature, c6, det, waist):
    cfg = PhysicalConfig(temperature=temperature, c6=2 * np.pi * c6 * 1e-3,
                         detunings=(2 * np.pi * det, 0.3, 0.0), beam_waists=(waist, 2.0, 2.0))
    assert load_config(dump_config(cfg)) == cfg


def test_missing_file_is_a_config_error(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "absent.ini")
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "absent.ini"))
