"""Size scaling of the voice-coil detector and the SNR sweep."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from forcenoise.constants import MU0
from forcenoise.errors import ParameterError
from forcenoise.params import CURRENT, VOLTAGE, derived_frequencies
from forcenoise.noise import closed_form_components_fn
from forcenoise.scaling import (
    SWEEP_COLUMNS,
    ScalingConfig,
    SweepTable,
    detector_snr,
    gap_db,
    gaps_at,
    geometry,
    position_psd_fn,
    position_snr,
    radius_sweep,
    scale_parameters,
    scale_position_reference,
    spring_constant,
)
from forcenoise.noise import optomech_reference_psd

CFG = ScalingConfig()


def test_anchor_at_one_millimetre():
    sd = scale_parameters(1e-3)
    assert sd.params.m == pytest.approx(1e-3, rel=0.10)
    assert sd.params.L == pytest.approx(1e-5, rel=0.10)
    assert sd.params.T_v == pytest.approx(2.0, rel=0.05)
    # frozen values of the scaling rules themselves
    assert sd.params.m == pytest.approx(7500 * math.pi * 1e-6 * 0.04, rel=1e-14)
    assert sd.geometry.N == pytest.approx(309.0)
    assert sd.params.T_v == pytest.approx(2 * math.pi * 309 * 1e-3, rel=1e-14)
    assert sd.params.L == pytest.approx(MU0 * 309 ** 2 * math.pi * 1e-6 / 0.04, rel=1e-14)
    assert sd.nu_star == pytest.approx(2 * math.pi * 1e6)
    assert derived_frequencies(sd.case, sd.params).omega_m == pytest.approx(2 * math.pi * 10)


@settings(max_examples=30, deadline=None)
@given(R=st.floats(1e-4, 2.0))
def test_geometric_power_laws(R):
    g0, g = geometry(1e-3, CFG), geometry(R, CFG)
    s = R / 1e-3
    assert g.m / g0.m == pytest.approx(s ** 3, rel=1e-12)
    assert g.T_v / g0.T_v == pytest.approx(s ** 2, rel=1e-12)
    assert g.L / g0.L == pytest.approx(s ** 3, rel=1e-12)


def test_spring_choices():
    fixed = scale_parameters(0.1)
    scaled = scale_parameters(0.1, ScalingConfig(spring="scaled"))
    assert fixed.params.k == pytest.approx(spring_constant(1e-3, CFG))
    wm = derived_frequencies(scaled.case, scaled.params).omega_m
    assert wm == pytest.approx(2 * math.pi * 10, rel=1e-12)
    wm_fixed = derived_frequencies(fixed.case, fixed.params).omega_m
    assert wm_fixed == pytest.approx(2 * math.pi * 10 * 100 ** -1.5, rel=1e-12)


def test_current_readout_impedance_choice():
    a = scale_parameters(1e-2, readout=CURRENT)
    b = scale_parameters(1e-2, ScalingConfig(current_impedance="L"), readout=CURRENT)
    assert a.params.C_L == pytest.approx(a.params.L_M / CFG.Z0_x ** 2)
    assert b.params.C_L == pytest.approx(b.params.L / CFG.Z0_x ** 2)


def test_sql_cavity_is_balanced_at_every_radius():
    for R in (1e-3, 3e-2, 1.0):
        for readout in (VOLTAGE, CURRENT):
            sd = scale_parameters(R, readout=readout)
            ba, sh = closed_form_components_fn(sd.case, sd.params, sd.cavity)(sd.nu_star)
            assert float(ba) == pytest.approx(float(sh), rel=1e-9)


def test_position_psd_fast_path_matches_reference_model():
    ref = scale_position_reference(0.05)
    nu = 2 * np.pi * np.logspace(-1, 7, 300)
    fast = position_psd_fn(ref.params)(nu)
    slow = optomech_reference_psd("position", ref.params, None, nu).total
    assert np.allclose(fast, slow, rtol=1e-9)


def test_config_validation():
    with pytest.raises(ParameterError):
        ScalingConfig(rho=-1.0)
    with pytest.raises(ParameterError):
        ScalingConfig(spring="floppy")
    with pytest.raises(ParameterError):
        ScalingConfig(current_impedance="Z")
    with pytest.raises(ParameterError):
        ScalingConfig(L_over_LM=0.5)
    with pytest.raises(ParameterError):
        scale_parameters(-1.0)
    with pytest.raises(ParameterError):
        scale_parameters(1e-3, readout="optical")


def test_gap_conventions():
    assert gap_db(100.0, 1.0, "amplitude") == pytest.approx(10.0)
    assert gap_db(100.0, 1.0, "power") == pytest.approx(20.0)
    with pytest.raises(ParameterError):
        gap_db(1.0, 1.0, "bels")


def test_gaps_at_reference_radius():
    amp = gaps_at(0.1)
    pwr = gaps_at(0.1, convention="power")
    for k in amp:
        assert pwr[k] == pytest.approx(2 * amp[k], rel=1e-12)
    frozen = {"voltage_vs_position": 25.757, "current_vs_position": 8.179,
              "voltage_vs_sql": 39.019, "current_vs_sql": 21.441}
    for k, v in frozen.items():
        assert amp[k] == pytest.approx(v, abs=2e-3)


def test_snr_improves_with_size():
    small, big = scale_parameters(1e-2), scale_parameters(1e-1)
    assert detector_snr(big).snr_sq > detector_snr(small).snr_sq
    assert position_snr(scale_position_reference(1e-1)).snr_sq > \
        position_snr(scale_position_reference(1e-2)).snr_sq


def test_sweep_table_and_csv(tmp_path):
    R = np.geomspace(1e-2, 1.0, 5)[::-1]  # unsorted input comes back sorted
    tab = radius_sweep(R)
    assert isinstance(tab, SweepTable) and len(tab) == 5
    assert np.all(np.diff(tab.R) > 0)
    assert tab.failures == [] and tab.success_fraction() == 1.0
    for c in SWEEP_COLUMNS:
        assert np.all(np.diff(np.log(tab.column(c))) > 0)
    s = tab.slopes()
    assert s["snr2_voltage"] == pytest.approx(2.5, abs=0.01)
    for c in ("snr2_current", "snr2_position", "snr2_sql"):
        assert s[c] == pytest.approx(2.0, abs=0.01)
    path = tmp_path / "sweep.csv"
    text = tab.to_csv(path)
    assert path.read_text() == text
    lines = text.splitlines()
    assert lines[0] == "R_m," + ",".join(SWEEP_COLUMNS)
    assert len([ln for ln in lines if not ln.startswith("#")]) == 6
    assert all(float(f) > 0 for f in lines[1].split(","))
    assert sum(ln.startswith("# slope") for ln in lines) == 4


def test_empty_or_bad_grid_rejected():
    with pytest.raises(ParameterError):
        radius_sweep([])
    with pytest.raises(ParameterError):
        radius_sweep([1e-2, 0.0])
