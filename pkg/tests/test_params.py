"""Parameter containers, characteristic frequencies and the plate equilibrium."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from forcenoise.constants import EPS0
from forcenoise.errors import ParameterError, PlateContactError, UnstableBiasError
from forcenoise.params import (
    ALL_CASES,
    EM_CURRENT,
    EM_VOLTAGE,
    MM_CURRENT,
    MM_VOLTAGE,
    CavityParams,
    DetectorCase,
    ElectroMechParams,
    capacitance_at,
    check_case_params,
    derived_frequencies,
    reference_electromechanical,
    reference_magnetomechanical,
    find_equilibrium,
    potential,
    potential_gradient,
    potential_hessian,
    reduce_electromech,
    susceptibilities,
    transducer_constant_v,
    transducer_constant_x,
)

PLATES = dict(m=1e-3, k=10.0, A=1e-4, d_0=1e-5, C_P=25e-15, L=1e-5, L_M=1e-9)


def plates(V):
    return ElectroMechParams(V_DC=V, **PLATES)


# ---------------------------------------------------------------------------
# cases and containers
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("name", ["mm-voltage", "mm-current", "em-voltage", "em-current"])
def test_case_name_roundtrip(name):
    case = DetectorCase.parse(name)
    assert case.name == name
    assert DetectorCase.parse(case.name) == case


def test_case_gauge_only_for_magnetic():
    assert DetectorCase.parse("mm-voltage", 2).gauge == 2
    # the command line always passes a gauge; it is ignored for the plates
    assert DetectorCase.parse("em-voltage", 2) == EM_VOLTAGE
    with pytest.raises(ParameterError):
        DetectorCase("electromechanical", "voltage", 2)
    with pytest.raises(ParameterError):
        DetectorCase.parse("xx-voltage")


def test_accessed_variable():
    assert MM_VOLTAGE.accessed_variable == EM_CURRENT.accessed_variable
    assert MM_CURRENT.accessed_variable == EM_VOLTAGE.accessed_variable
    assert MM_VOLTAGE.accessed_variable != MM_CURRENT.accessed_variable


@pytest.mark.parametrize("bad", [dict(m=0.0), dict(k=-1.0), dict(L=float("nan")),
                                 dict(L_M=2e-5)])
def test_magnetic_params_validation(bad):
    with pytest.raises(ParameterError):
        reference_magnetomechanical(**bad)


def test_reduced_params_reject_unstable_spring():
    with pytest.raises(ParameterError):
        reference_electromechanical(k_eff=-1.0)


def test_cavity_validation():
    with pytest.raises(ParameterError):
        CavityParams(kappa=0.0, G=1.0)
    with pytest.raises(ParameterError):
        CavityParams(kappa=1.0, G=float("inf"))


def test_check_case_params_mismatch():
    with pytest.raises(ParameterError):
        check_case_params(MM_VOLTAGE, reference_electromechanical())
    with pytest.raises(ParameterError):
        check_case_params(EM_VOLTAGE, reference_magnetomechanical())
    with pytest.raises(ParameterError):
        check_case_params(MM_CURRENT, reference_magnetomechanical(L_M=None))
    with pytest.raises(ParameterError):
        check_case_params(MM_VOLTAGE, reference_magnetomechanical(),
                          CavityParams(kappa=1.0, G=1.0, G_x=1.0))


def test_transducer_constant_v():
    assert transducer_constant_v(309.0, 1e-3, 1.0) == pytest.approx(2 * math.pi * 309e-3)
    with pytest.raises(ParameterError):
        transducer_constant_v(10, 0.0, 1.0)


def test_capacitance_contact():
    assert capacitance_at(0.0, 1e-4, 1e-5) == pytest.approx(EPS0 * 10.0)
    with pytest.raises(PlateContactError):
        capacitance_at(1e-5, 1e-4, 1e-5)


# ---------------------------------------------------------------------------
# characteristic frequencies
# ---------------------------------------------------------------------------

def test_reference_frequencies_magnetic():
    f = derived_frequencies(MM_VOLTAGE, reference_magnetomechanical())
    assert f.omega_m == pytest.approx(2 * math.pi * 10, rel=1e-14)
    assert f.omega_c == pytest.approx(2 * math.pi * 1e7, rel=1e-14)
    # delta_v^2 = T_v^2 / (m L)
    assert f.delta_sq == pytest.approx(4.0 / (1e-3 * 1e-5), rel=1e-14)
    assert f.delta_signed > 0


def test_reference_frequencies_plates():
    p = reference_electromechanical()
    f = derived_frequencies(EM_VOLTAGE, p)
    Ceff = p.C_x0 + p.C_P
    assert f.omega_c_sq == pytest.approx(1.0 / (p.L * Ceff), rel=1e-14)
    assert f.delta_sq == pytest.approx(Ceff * p.T_x ** 2 / (p.m * p.C_P ** 2), rel=1e-14)
    assert f.delta_signed < 0  # follows the sign of T_x
    # operating point chosen to put the circuit resonance near 1 MHz
    assert f.omega_c / (2 * math.pi) == pytest.approx(1.0e6, rel=1e-3)


@settings(max_examples=40, deadline=None)
@given(nu=st.floats(1.0, 1e10), case=st.sampled_from(ALL_CASES))
def test_susceptibility_symmetry(nu, case):
    """Real-time response: chi(-nu) = conj(chi(nu)); real parts even in nu."""
    p = reference_magnetomechanical() if case.is_magnetic else reference_electromechanical()
    kap = 2 * math.pi * 1e6
    a = susceptibilities(case, p, nu, kap)
    b = susceptibilities(case, p, -nu, kap)
    assert np.allclose(b.chi_kappa, np.conj(a.chi_kappa), rtol=1e-14)
    for name in ("chi_m", "chi_m_prime", "chi_lc"):
        x, y = getattr(a, name), getattr(b, name)
        if np.isfinite(x):
            assert y == pytest.approx(x, rel=1e-13)


def test_susceptibility_pole_flagged():
    p = reference_magnetomechanical()
    wm = math.sqrt(p.k / p.m)
    s = susceptibilities(MM_VOLTAGE, p, wm, 1.0)
    assert bool(s.singular)


# ---------------------------------------------------------------------------
# equilibrium of the biased plates
# ---------------------------------------------------------------------------

def test_zero_bias_is_exact_origin():
    eq = find_equilibrium(plates(0.0))
    assert eq.Q_0 == 0.0 and eq.x_0 == 0.0
    assert eq.is_stable


def _grid_minimum(p, Q_range, x_range, n=201, rounds=4):
    """Brute-force minimum of V(Q, x) by repeatedly zoomed grids."""
    (q0, q1), (x0, x1) = Q_range, x_range
    for _ in range(rounds):
        Q = np.linspace(q0, q1, n)
        x = np.linspace(x0, x1, n)
        QQ, XX = np.meshgrid(Q, x, indexing="ij")
        V = potential(p, QQ, XX)
        i, j = np.unravel_index(np.argmin(V), V.shape)
        dq, dx = Q[1] - Q[0], x[1] - x[0]
        q0, q1 = Q[i] - 5 * dq, Q[i] + 5 * dq
        x0, x1 = x[j] - 5 * dx, x[j] + 5 * dx
    return Q[i], x[j], dq, dx


def test_equilibrium_matches_grid_minimum():
    p = plates(1.0)
    eq = find_equilibrium(p)
    Qg, xg, dq, dx = _grid_minimum(p, (-2 * p.C_0 * p.V_DC, 0.0), (-0.1 * p.d_0, 0.3 * p.d_0))
    assert abs(eq.Q_0 - Qg) <= dq
    assert abs(eq.x_0 - xg) <= dx
    assert eq.is_stable
    assert eq.grad_norm < 1e-12


def test_equilibrium_reference_values():
    p = plates(1.0)
    eq = find_equilibrium(p)
    assert eq.Q_0 == pytest.approx(-9.3099e-11, rel=1e-4)
    assert eq.x_0 == pytest.approx(4.894e-7, rel=1e-3)
    assert p.pull_in_voltage == pytest.approx(1.8293, rel=1e-4)


def test_gradient_vanishes_and_hessian_matches_fd():
    p = plates(1.2)
    eq = find_equilibrium(p)
    g = potential_gradient(p, eq.Q_0, eq.x_0)
    assert abs(g[0]) * abs(eq.Q_0) < 1e-12 * p.k * p.d_0 ** 2
    assert abs(g[1]) * p.d_0 < 1e-12 * p.k * p.d_0 ** 2
    H = potential_hessian(p, eq.Q_0, eq.x_0)
    hq, hx = 1e-4 * abs(eq.Q_0), 1e-4 * p.d_0
    fd = np.empty((2, 2))
    fd[0, 0] = (potential_gradient(p, eq.Q_0 + hq, eq.x_0)[0]
                - potential_gradient(p, eq.Q_0 - hq, eq.x_0)[0]) / (2 * hq)
    fd[1, 1] = (potential_gradient(p, eq.Q_0, eq.x_0 + hx)[1]
                - potential_gradient(p, eq.Q_0, eq.x_0 - hx)[1]) / (2 * hx)
    fd[0, 1] = fd[1, 0] = (potential_gradient(p, eq.Q_0, eq.x_0 + hx)[0]
                           - potential_gradient(p, eq.Q_0, eq.x_0 - hx)[0]) / (2 * hx)
    assert np.allclose(H, fd, rtol=1e-6)


def test_transducer_constant_and_spring_from_potential_fd():
    """T_x = -C_P d2V/dQdx and k_eff = d2V/dx2 from differences of V itself."""
    p = plates(1.0)
    eq = find_equilibrium(p)
    red = reduce_electromech(p, eq)
    Q, x = eq.Q_0, eq.x_0
    hq, hx = 1e-3 * abs(Q), 1e-3 * p.d_0
    V = lambda q, y: float(potential(p, q, y))  # noqa: E731
    Vqx = (V(Q + hq, x + hx) - V(Q + hq, x - hx) - V(Q - hq, x + hx) + V(Q - hq, x - hx)) / (4 * hq * hx)
    Vxx = (V(Q, x + hx) - 2 * V(Q, x) + V(Q, x - hx)) / hx ** 2
    assert transducer_constant_x(p, eq) == pytest.approx(-p.C_P * Vqx, rel=1e-5)
    assert red.T_x == pytest.approx(-2.628e-9, rel=1e-3)
    assert red.k_eff == pytest.approx(Vxx, rel=1e-5)
    assert red.C_eff == pytest.approx(capacitance_at(x, p.A, p.d_0) + p.C_P)


@pytest.mark.parametrize("V", [1.9, 3.0])
def test_pull_in_is_an_error(V):
    with pytest.raises(UnstableBiasError) as info:
        find_equilibrium(plates(V))
    assert info.value.V_pull_in == pytest.approx(plates(V).pull_in_voltage)


@settings(max_examples=15, deadline=None)
@given(frac=st.floats(0.05, 0.9))
def test_equilibrium_below_pull_in_is_stable_minimum(frac):
    p = plates(frac * plates(1.0).pull_in_voltage)
    eq = find_equilibrium(p)
    assert eq.is_stable
    assert 0 < eq.x_0 < p.d_0 / 3  # plates approach, but not past the pull-in gap
    # neighbouring points are not lower
    for dq, dx in ((1e-3, 0), (-1e-3, 0), (0, 1e-3), (0, -1e-3)):
        Q = eq.Q_0 * (1 + dq)
        x = eq.x_0 + dx * p.d_0
        assert potential(p, Q, x) >= eq.V_min - 1e-12 * abs(eq.V_min)
