"""Linearised frequency-domain dynamics of the four receivers.

State ordering is fixed to ``Z = (x, p, Phi, Q, X, Y)``: mechanical position
and momentum, circuit node flux and charge, and the amplitude/phase
quadratures of the readout cavity.  The equations of motion are
``dZ/dt = M Z + Z_in`` with

    Z_in = (0, F_in, 0, 0, -sqrt(kappa) X_in, -sqrt(kappa) Y_in),

so in the frequency domain ``Z(nu) = (i nu I - M)^-1 Z_in(nu)`` and the
measured output is ``Y_out = Y_in + sqrt(kappa) Y``.  Writing
``Y_out = c_Y Y_in + c_X X_in + c_F F_in`` the force estimator is
``Y_out / c_F = F_in + beta X_in + gamma Y_in`` with ``beta = c_X / c_F`` and
``gamma = c_Y / c_F``.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .constants import HBAR
from .errors import ParameterError, PoleSingularityError, SingularMatrixError, ZeroSignalError
from .linalg import EXT_COMPLEX, EXT_REAL, inverse
from .params import CavityParams, DetectorCase, check_case_params, derived_frequencies

STATE_LABELS = ("x", "p", "Phi", "Q", "X", "Y")
IDX_P, IDX_X, IDX_Y = 1, 4, 5

#: condition numbers above this mark a result as unreliable
COND_LIMIT = 1e12


@dataclass(frozen=True)
class InputMap:
    """Where the noise and signal inputs enter the state equations."""

    force_row: int = IDX_P
    x_in_row: int = IDX_X
    y_in_row: int = IDX_Y

    def vector(self, kappa, F=0.0, X=0.0, Y=0.0):
        z = np.zeros(6, dtype=complex)
        z[self.force_row] = F
        z[self.x_in_row] = -np.sqrt(kappa) * X
        z[self.y_in_row] = -np.sqrt(kappa) * Y
        return z


INPUT_MAP = InputMap()


@dataclass(frozen=True)
class SystemMatrix:
    """Real 6x6 drift matrix, stored in extended precision."""

    entries: np.ndarray = field(repr=False)
    case: DetectorCase

    @property
    def as_float(self) -> np.ndarray:
        return self.entries.astype(float)

    def __getitem__(self, idx):
        return float(self.entries[idx])

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# system matrix: {self.case.label}\n")
        buf.write("row," + ",".join(STATE_LABELS) + "\n")
        for lab, row in zip(STATE_LABELS, self.as_float):
            buf.write(lab + "," + ",".join("%.12e" % v for v in row) + "\n")
        return buf.getvalue()


def build_system_matrix(case: DetectorCase, params, cavity: CavityParams) -> SystemMatrix:
    """Drift matrix ``M`` of ``dZ/dt = M Z + Z_in`` for ``case``.

    The magnetomechanical detector has two circuit gauges.  Gauge 1 keeps the
    coil flux as the circuit variable, which puts the transduction in the
    mechanical/charge rows via ``1/C_L' = 1/C_L + T_v^2/m``; gauge 2 moves it
    into the force/flux rows with ``k' = k + T_v^2/L``.  Current readout adds
    the readout inductor through ``k_M' = k + T_v^2/L_M`` and
    ``1/L' = 1/L + 1/L_M``.  Entries are assembled in extended precision so
    that these sums keep their small parts.
    """
    check_case_params(case, params, cavity)
    E = EXT_REAL
    M = np.zeros((6, 6), dtype=E)
    kap = E(cavity.kappa)
    D = E(cavity.Delta)
    G = E(cavity.G)
    hb = E(HBAR)
    m = E(params.m)
    L = E(params.L)
    LM = E(params.L_M) if params.L_M is not None else None

    # cavity block (common)
    M[4, 4] = -kap / 2
    M[4, 5] = -D
    M[5, 4] = D
    M[5, 5] = -kap / 2
    M[0, 1] = 1 / m

    if case.is_magnetic:
        k = E(params.k)
        Tv = E(params.T_v)
        CL = E(params.C_L)
        iCLp = 1 / CL + Tv ** 2 / m
        kp = k + Tv ** 2 / L
        if case.is_voltage and case.gauge == 1:
            M[0, 3] = -Tv / m
            M[1, 0] = -k
            M[2, 1] = -Tv / m
            M[2, 3] = iCLp
            M[2, 4] = -hb * G
            M[3, 2] = -1 / L
            M[5, 3] = G
        elif case.is_voltage:
            M[1, 0] = -kp
            M[1, 2] = Tv / L
            M[2, 3] = 1 / CL
            M[2, 4] = -hb * G
            M[3, 0] = Tv / L
            M[3, 2] = -1 / L
            M[5, 3] = G
        elif case.gauge == 1:
            kMp = k + Tv ** 2 / LM
            iLp = 1 / L + 1 / LM
            M[0, 3] = -Tv / m
            M[1, 0] = -kMp
            M[1, 2] = -Tv / LM
            M[1, 4] = hb * G * Tv
            M[2, 1] = -Tv / m
            M[2, 3] = iCLp
            M[3, 0] = -Tv / LM
            M[3, 2] = -iLp
            M[3, 4] = hb * G
            M[5, 0] = G * Tv
            M[5, 2] = G
        else:
            iLp = 1 / L + 1 / LM
            M[1, 0] = -kp
            M[1, 2] = Tv / L
            M[2, 3] = 1 / CL
            M[3, 0] = Tv / L
            M[3, 2] = -iLp
            M[3, 4] = hb * G
            M[5, 2] = G
    else:
        keff = E(params.k_eff)
        Tx = E(params.T_x)
        CP = E(params.C_P)
        Ceff = E(params.C_x0) + CP
        M[1, 0] = -keff
        M[1, 3] = Tx / CP
        M[2, 0] = -Tx / CP
        M[2, 3] = 1 / Ceff
        if case.is_voltage:
            Gx = E(cavity.G_x)
            M[1, 4] = -hb * Gx
            M[2, 4] = hb * G
            M[3, 2] = -1 / L
            M[5, 0] = -Gx
            M[5, 3] = -G
        else:
            iLp = 1 / L + 1 / LM
            M[3, 2] = -iLp
            M[3, 4] = -hb * G
            M[5, 2] = -G
    return SystemMatrix(M, case)


@dataclass
class TransferSolution:
    """Frequency response at one or many frequencies ``nu`` (rad/s)."""

    nu: np.ndarray
    resolvent: np.ndarray  # (..., 6, 6)
    c_Y: np.ndarray
    c_X: np.ndarray
    c_F: np.ndarray
    cond: np.ndarray
    residual: np.ndarray
    oracle_valid: bool = True  # False when Delta != 0

    @property
    def beta(self):
        return self.c_X / self.c_F

    @property
    def gamma(self):
        return self.c_Y / self.c_F

    @property
    def ill_conditioned(self):
        return self.cond > COND_LIMIT


def solve_resolvent(matrix: SystemMatrix, nu):
    """``(i nu I - M)^-1`` for every entry of ``nu``; returns the Solution."""
    nu = np.asarray(nu, dtype=float)
    Mf = matrix.as_float
    eye = np.eye(6)
    A = 1j * nu[..., None, None] * eye - Mf
    A_ext = (EXT_COMPLEX(1j) * nu.astype(EXT_REAL)[..., None, None] * eye.astype(EXT_REAL)
             - matrix.entries)
    try:
        return inverse(A, M_ext=A_ext)
    except SingularMatrixError as exc:
        raise PoleSingularityError(f"resolvent is singular: {exc}") from exc


def estimator_coefficients(case: DetectorCase, params, cavity: CavityParams, nu,
                           allow_zero_signal: bool = False) -> TransferSolution:
    """Solve the linear response and extract the estimator coefficients.

    ``nu`` may be a scalar or an array (rad/s).  Raises
    :class:`ZeroSignalError` when the force never reaches the output.
    """
    mat = build_system_matrix(case, params, cavity)
    return coefficients_from_matrix(mat, cavity, nu, allow_zero_signal)


def coefficients_from_matrix(mat: SystemMatrix, cavity: CavityParams, nu,
                             allow_zero_signal: bool = False) -> TransferSolution:
    """As :func:`estimator_coefficients` for an already assembled matrix."""
    nu_arr = np.asarray(nu, dtype=float)
    sol = solve_resolvent(mat, nu_arr)
    R = sol.x
    kap = cavity.kappa
    c_Y = 1.0 - kap * R[..., IDX_Y, IDX_Y]
    c_X = -kap * R[..., IDX_Y, IDX_X]
    c_F = np.sqrt(kap) * R[..., IDX_Y, IDX_P]
    if not allow_zero_signal and np.any(c_F == 0):
        raise ZeroSignalError(f"{mat.case.label}: force does not reach the output "
                              "(c_F == 0); check the coupling G")
    return TransferSolution(nu_arr, R, c_Y, c_X, c_F, sol.cond, sol.residual,
                            oracle_valid=cavity.Delta == 0)


# ---------------------------------------------------------------------------
# analytic output quadratures (zero detuning)
# ---------------------------------------------------------------------------

def mode_polynomial(case: DetectorCase, params):
    """Coefficients (a1, a0) of the normal-mode polynomial s^2 - a1 s + a0, s = nu^2.

    Its roots are the undamped hybridised mechanical/circuit resonances; it
    is the shared denominator of all output coefficients.
    """
    f = derived_frequencies(case, params)
    wm2, wc2, wl2, d2 = f.omega_m_sq, f.omega_c_sq, f.omega_l_sq, f.delta_sq
    if case.is_magnetic and case.is_voltage:
        return wc2 + wm2 + d2, wc2 * wm2
    if case.is_magnetic:
        return wc2 + wl2 + wm2 + d2, wm2 * (wc2 + wl2) + d2 * wl2
    if case.is_voltage:
        return wc2 + wm2, wc2 * (wm2 - d2)
    W = wc2 + wl2
    return W + wm2, W * (wm2 - d2)


def _mode_denominator(case, f, n2):
    wm2, wc2, wl2, d2 = f.omega_m_sq, f.omega_c_sq, f.omega_l_sq, f.delta_sq
    if case.is_magnetic and case.is_voltage:
        return (n2 - wc2) * (n2 - wm2) - d2 * n2
    if case.is_magnetic:
        return (n2 - wc2 - wl2) * (n2 - wm2) - d2 * (n2 - wl2)
    if case.is_voltage:
        return (n2 - wc2) * (n2 - wm2) - d2 * wc2
    return (n2 - wc2 - wl2) * (n2 - wm2) - d2 * (wc2 + wl2)


def _quadratic_roots(a1, a0):
    """Roots of s^2 - a1 s + a0 (real case), computed without cancellation."""
    disc = a1 * a1 - 4 * a0
    if disc < 0:
        return np.array([])
    q = 0.5 * (a1 + np.sqrt(disc))
    r = [q, a0 / q] if q != 0 else [0.0]
    return np.sort(np.array(r))


def real_poles(case: DetectorCase, params) -> np.ndarray:
    """Positive real poles (rad/s) of the case's response functions.

    Includes the hybridised normal modes and the bare (or, for current
    readout of the voice coil, dressed) mechanical resonance appearing in the
    susceptibilities.
    """
    f = derived_frequencies(case, params)
    s = list(_quadratic_roots(*mode_polynomial(case, params)))
    s.append(f.omega_m_sq)
    if case.is_magnetic and not case.is_voltage:
        s.append(f.omega_m_sq + f.delta_sq)
    s = np.array([v for v in s if v > 0])
    return np.unique(np.sqrt(s))


def pole_mask(case: DetectorCase, params, nu, rel: float = 1e-3) -> np.ndarray:
    """True where ``|nu|`` lies within relative distance ``rel`` of a real pole."""
    nu = np.abs(np.asarray(nu, dtype=float))
    poles = real_poles(case, params)
    if poles.size == 0:
        return np.zeros(nu.shape, bool)
    d = np.abs(nu[..., None] / poles - 1.0)
    return np.any(d < rel, axis=-1)


def y_out_closed_form(case: DetectorCase, params, cavity: CavityParams, nu):
    """Analytic ``(c_Y, c_X, c_F)`` of the output phase quadrature at zero detuning.

    ``c_Y`` is the unimodular empty-cavity reflection.  For the
    electromechanical detector the position-coupling cross terms are written
    with the signed ``delta_x`` (sign of ``T_x``), and the force coefficients
    are normalised so that they coincide with the solution of the
    corresponding drift matrix.
    """
    if cavity.Delta != 0:
        raise ParameterError("closed forms are only valid at zero detuning")
    check_case_params(case, params, cavity)
    f = derived_frequencies(case, params)
    nu = np.asarray(nu, dtype=float)
    n2 = nu ** 2
    kap = cavity.kappa
    G = cavity.G
    kp = kap / 2 + 1j * nu
    r = -(kap / 2 - 1j * nu) / kp
    den = _mode_denominator(case, f, n2)
    if np.any(den == 0):
        raise PoleSingularityError(f"{case.name}: evaluation at a real pole", nu=nu)
    m, L = params.m, params.L
    wm2, wc2, d2 = f.omega_m_sq, f.omega_c_sq, f.delta_sq
    dv = f.delta
    if case.is_magnetic and case.is_voltage:
        cX = HBAR * G ** 2 * kap * (n2 - wm2) / (L * kp ** 2 * den)
        cF = 1j * G * np.sqrt(kap) * dv * nu / (np.sqrt(m * L) * kp * den)
    elif case.is_magnetic:
        cX = HBAR * G ** 2 * kap * L * wc2 * (n2 - wm2 - d2) / (kp ** 2 * den)
        cF = G * np.sqrt(kap * L) * dv * wc2 / (np.sqrt(m) * kp * den)
    elif case.is_voltage:
        Gx = cavity.G_x
        ds = f.delta_signed
        wce = f.omega_c
        sml = np.sqrt(m * L)
        cX = HBAR * kap * (G ** 2 * m * (n2 - wm2) - 2 * G * Gx * sml * ds * wce
                           + Gx ** 2 * L * (n2 - wc2)) / (m * L * kp ** 2 * den)
        cF = np.sqrt(kap) * (Gx * L * (n2 - wc2) - G * sml * ds * wce) / (m * L * kp * den)
    else:
        ds = f.delta_signed
        cX = HBAR * G ** 2 * kap * L * wc2 * (n2 - wm2 + d2) / (kp ** 2 * den)
        cF = 1j * G * np.sqrt(kap * L) * ds * f.omega_c * nu / (np.sqrt(m) * kp * den)
    return r, cX, cF
