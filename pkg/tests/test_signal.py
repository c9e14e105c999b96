"""Impulse signal, matched-filter SNR and its numerical safeguards."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from forcenoise.constants import G_NEWTON, HBAR, PLANCK_MASS
from forcenoise.errors import ParameterError, QuadratureError
from forcenoise.params import ALL_CASES, EM_CURRENT, MM_CURRENT, MM_VOLTAGE
from forcenoise.signal import (
    DEFAULT_NU_MIN,
    DmEncounter,
    case_snr,
    default_nu_max,
    dip_breakpoints,
    dm_force_freq,
    dm_force_time,
    near_zero_peak,
    snr_opt,
    sql_benchmark,
    white_noise_snr_sq,
)

from conftest import reference_setup

ENC = DmEncounter()


def test_encounter_scales():
    assert ENC.tau == pytest.approx(5e-9)
    assert ENC.peak_force == pytest.approx(G_NEWTON * 1e-3 * PLANCK_MASS / 1e-6)
    assert float(dm_force_time(ENC, 0.0)) == pytest.approx(ENC.peak_force, rel=1e-15)
    with pytest.raises(ParameterError):
        DmEncounter(b=0.0)
    with pytest.raises(ParameterError):
        DmEncounter(m_dm=-1.0)


def test_time_integral_equals_zero_frequency_amplitude():
    """sqrt(2 pi) F(0) equals the total impulse int F dt."""
    val, _ = integrate.quad(lambda t: float(dm_force_time(ENC, t)), -np.inf, np.inf,
                            epsrel=1e-12)
    assert math.sqrt(2 * math.pi) * float(dm_force_freq(ENC, 0.0, "exact")) == pytest.approx(
        val, rel=1e-10)
    assert float(dm_force_freq(ENC, 0.0, "approx")) == pytest.approx(ENC.spectral_scale)


def test_fft_matches_exact_transform():
    """Discrete transform of the sampled pulse vs the Bessel-function spectrum."""
    tau = ENC.tau
    N = 2 ** 20
    dt = 4000 * tau / N
    t = (np.arange(N) - N // 2) * dt
    F = np.fft.fft(np.fft.ifftshift(dm_force_time(ENC, t))) * dt / math.sqrt(2 * math.pi)
    nu = 2 * np.pi * np.fft.fftfreq(N, dt)
    sel = (nu > 0) & (nu * tau > 1e-2) & (nu * tau < 8)
    exact = dm_force_freq(ENC, nu[sel], "exact")
    assert np.max(np.abs(F[sel].real / exact - 1)) < 1e-4
    assert np.max(np.abs(F[sel].imag) / exact) < 1e-4


def test_exact_and_approximate_forms_agree_at_low_frequency():
    nu = np.linspace(1e-6, 0.02, 200) / ENC.tau
    r = dm_force_freq(ENC, nu, "exact") / dm_force_freq(ENC, nu, "approx")
    assert np.max(np.abs(r - 1)) < 0.01
    # and clearly differ once b nu / v ~ 1
    r1 = float(dm_force_freq(ENC, 2 / ENC.tau, "exact") / dm_force_freq(ENC, 2 / ENC.tau, "approx"))
    assert abs(r1 - 1) > 0.1
    with pytest.raises(ParameterError):
        dm_force_freq(ENC, 1.0, "gaussian")


def test_spectrum_even_in_frequency():
    nu = np.array([1e3, 1e7, 1e8])
    for form in ("approx", "exact"):
        assert np.allclose(dm_force_freq(ENC, nu, form), dm_force_freq(ENC, -nu, form))


# ---------------------------------------------------------------------------
# matched filter
# ---------------------------------------------------------------------------

def test_white_noise_closed_form():
    S0 = 1e-36
    res = snr_opt(ENC, lambda nu: S0)
    assert res.snr_sq == pytest.approx(white_noise_snr_sq(ENC, S0), rel=1e-6)
    assert res.quadrature_error < 1e-6
    assert res.snr == pytest.approx(math.sqrt(res.snr_sq))


def test_white_noise_exact_form_by_independent_quadrature():
    S0 = 1e-36
    res = snr_opt(ENC, lambda nu: S0, form="exact")
    ref, _ = integrate.quad(lambda x: float(dm_force_freq(ENC, x / ENC.tau, "exact")) ** 2,
                            DEFAULT_NU_MIN * ENC.tau, 40.0, epsrel=1e-12, limit=200)
    assert res.snr_sq == pytest.approx(ref / ENC.tau / S0, rel=1e-6)


@settings(max_examples=20, deadline=None)
@given(scale=st.floats(0.1, 10.0), S0=st.floats(1e-40, 1e-30))
def test_snr_inverse_in_noise_and_quadratic_in_mass(scale, S0):
    a = snr_opt(ENC, lambda nu: S0).snr_sq
    b = snr_opt(ENC, lambda nu: S0 * scale).snr_sq
    assert b == pytest.approx(a / scale, rel=1e-9)
    e2 = DmEncounter(m_dm=ENC.m_dm * 2)
    assert snr_opt(e2, lambda nu: S0).snr_sq == pytest.approx(4 * a, rel=1e-9)


def test_zero_mass_gives_zero_snr():
    res = snr_opt(DmEncounter(m_dm=0.0), lambda nu: 1.0)
    assert res.snr_sq == 0.0


def test_snr_rejects_bad_inputs():
    with pytest.raises(ParameterError):
        snr_opt(ENC, lambda nu: 1.0, nu_min=10.0, nu_max=1.0)
    with pytest.raises(ParameterError):
        snr_opt(ENC, lambda nu: -1.0)


def test_quadrature_error_is_reported():
    """A noise dip far narrower than anything the rule can find unaided."""
    nu0 = 1e6

    def psd(nu):
        return 1e-36 * ((nu - nu0) ** 2 / nu0 ** 2 + 1e-24)

    with pytest.raises(QuadratureError) as info:
        snr_opt(ENC, psd, rtol=1e-6, n_decade_splits=1)
    assert info.value.estimate is not None


def test_dip_breakpoints():
    pts = dip_breakpoints([100.0, -5.0, np.nan], 1.0, 1e3, depth=3)
    assert 100.0 in pts
    assert np.allclose(sorted(pts), [90.0, 99.0, 99.9, 100.0, 100.1, 101.0, 110.0])
    # a root just outside the range still contributes the offsets inside it
    pts = dip_breakpoints([1e3], 1.0, 1e3, depth=2)
    assert np.allclose(pts, [900.0, 990.0])


def test_near_zero_peak_matches_quadrature():
    nu_b, gap, A, B, N = 100.0, 1e-3, 2.0, 3.0, 1e-6
    lo, hi = nu_b - 0.5, nu_b + 0.5
    F2 = float(dm_force_freq(ENC, nu_b)) ** 2

    def model(nu):
        return A * (nu - nu_b) ** 2 + B * (nu - nu_b + gap) ** 2 + N

    ref, _ = integrate.quad(lambda v: F2 / model(v), lo, hi, points=[nu_b - gap, nu_b],
                            epsrel=1e-12, limit=200)
    assert near_zero_peak(ENC, "approx", nu_b, gap, A, B, N, lo, hi) == pytest.approx(ref, rel=1e-9)
    with pytest.raises(ParameterError):
        near_zero_peak(ENC, "approx", nu_b, 0.0, A, B, 0.0, lo, hi)


def test_sql_benchmark():
    dF, ratio = sql_benchmark(1e-3, ENC.tau, ENC.peak_force)
    assert dF == pytest.approx(math.sqrt(HBAR * 1e-3 / ENC.tau ** 3))
    assert ratio == pytest.approx((ENC.peak_force / dF) ** 2)
    with pytest.raises(ParameterError):
        sql_benchmark(0.0, 1.0, 1.0)


def test_default_cutoff():
    assert default_nu_max(ENC) == pytest.approx(40 * ENC.v / ENC.b)


# ---------------------------------------------------------------------------
# detector SNR
# ---------------------------------------------------------------------------

REFERENCE_SNR2 = {  # reference detectors, closed-form engine, approximate pulse
    "mm-voltage": 1.59163e-11,
    "mm-current": 4.99975e-14,
    "em-voltage": 1.59986e-11,
    "em-current": 1.59986e-11,
}


@pytest.mark.parametrize("case", ALL_CASES, ids=lambda c: c.name)
def test_case_snr_reference_values(case):
    p, cav = reference_setup(case)
    res = case_snr(case, p, cav, ENC)
    assert np.isfinite(res.snr_sq) and res.snr_sq > 0
    assert res.snr_sq == pytest.approx(REFERENCE_SNR2[case.name], rel=1e-5)
    assert res.result.quadrature_error < 1e-6


def test_unresolvable_zero_pair_uses_local_model():
    """The current-readout plate detector has zeros 1e-16 apart: nearly all
    of the SNR comes from the analytic window."""
    p, cav = reference_setup(EM_CURRENT)
    res = case_snr(EM_CURRENT, p, cav, ENC)
    assert len(res.peaks) == 1
    assert res.peak_contribution / res.snr_sq > 0.999


def test_local_model_agrees_with_quadrature_where_both_apply():
    """Voice-coil voltage readout: zeros 5e-8 apart (relative) are resolvable
    by quadrature, and forcing the local model gives the same SNR^2."""
    p, cav = reference_setup(MM_VOLTAGE)
    plain = case_snr(MM_VOLTAGE, p, cav, ENC)
    forced = case_snr(MM_VOLTAGE, p, cav, ENC, resolve_rel=1e-6)
    assert plain.peaks == () and len(forced.peaks) == 1
    assert forced.peak_contribution / forced.snr_sq > 0.9
    assert forced.snr_sq == pytest.approx(plain.snr_sq, rel=1e-7)


@pytest.mark.slow
def test_numeric_engine_snr_matches_closed_form():
    p, cav = reference_setup(MM_CURRENT)
    a = case_snr(MM_CURRENT, p, cav, ENC, engine="closed-form")
    b = case_snr(MM_CURRENT, p, cav, ENC, engine="numeric")
    assert b.snr_sq == pytest.approx(a.snr_sq, rel=1e-6)


def test_case_snr_unknown_engine():
    p, cav = reference_setup(MM_VOLTAGE)
    with pytest.raises(ParameterError):
        case_snr(MM_VOLTAGE, p, cav, ENC, engine="abacus")
