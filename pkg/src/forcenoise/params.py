"""Physical parameters, transducer constants and characteristic frequencies.

Everything here is SI with angular frequencies in rad/s.  The four receiver
configurations are identified by :class:`DetectorCase`; the magnetomechanical
detector additionally carries the circuit gauge (1 or 2) used to write its
equations of motion.

The electromechanical detector is specified either by its geometry and
bias (:class:`ElectroMechParams`, reduced through :func:`find_equilibrium`)
or directly by its linearised constants (:class:`ReducedElectroMechParams`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .constants import EPS0, TWO_PI
from .errors import (
    ConvergenceError,
    ParameterError,
    PlateContactError,
    UnstableBiasError,
)

MAGNETOMECHANICAL = "magnetomechanical"
ELECTROMECHANICAL = "electromechanical"
VOLTAGE = "voltage"
CURRENT = "current"


# ---------------------------------------------------------------------------
# detector / readout selector
# ---------------------------------------------------------------------------

_SHORT = {MAGNETOMECHANICAL: "mm", ELECTROMECHANICAL: "em"}
_LONG = {v: k for k, v in _SHORT.items()}


@dataclass(frozen=True)
class DetectorCase:
    """One detector/readout combination (plus gauge for the magnetic detector).

    ``gauge`` is 1 or 2 for the magnetomechanical detector and ``None`` for
    the electromechanical one, whose equations are written in a single gauge.
    """

    detector: str
    readout: str
    gauge: Optional[int] = None

    def __post_init__(self):
        if self.detector not in (MAGNETOMECHANICAL, ELECTROMECHANICAL):
            raise ParameterError(f"unknown detector {self.detector!r}")
        if self.readout not in (VOLTAGE, CURRENT):
            raise ParameterError(f"unknown readout {self.readout!r}")
        if self.detector == MAGNETOMECHANICAL:
            if self.gauge is None:
                object.__setattr__(self, "gauge", 1)
            if self.gauge not in (1, 2):
                raise ParameterError(f"gauge must be 1 or 2, got {self.gauge!r}")
        elif self.gauge not in (None,):
            raise ParameterError("the electromechanical detector has no gauge choice")

    @classmethod
    def parse(cls, name: str, gauge: Optional[int] = None) -> "DetectorCase":
        """Build a case from a short name such as ``"mm-voltage"``.

        Long detector names (``"magnetomechanical-current"``) are accepted too.
        """
        try:
            det, ro = name.strip().lower().split("-", 1)
        except ValueError:
            raise ParameterError(f"cannot parse case name {name!r}") from None
        det = _LONG.get(det, det)
        if det == ELECTROMECHANICAL:
            gauge = None
        return cls(det, ro, gauge)

    @property
    def name(self) -> str:
        return f"{_SHORT[self.detector]}-{self.readout}"

    @property
    def label(self) -> str:
        if self.gauge is not None:
            return f"{self.name} (gauge {self.gauge})"
        return self.name

    @property
    def is_magnetic(self) -> bool:
        return self.detector == MAGNETOMECHANICAL

    @property
    def is_voltage(self) -> bool:
        return self.readout == VOLTAGE

    @property
    def accessed_variable(self) -> str:
        """Mechanical quantity effectively monitored: ``'velocity'`` or ``'position'``.

        Voltage readout of the voice coil and current readout of the
        capacitor see the plate/magnet velocity; the other two see position.
        """
        return "velocity" if self.is_magnetic == self.is_voltage else "position"

    def with_gauge(self, gauge: int) -> "DetectorCase":
        return replace(self, gauge=gauge)

    def __str__(self):
        return self.label


MM_VOLTAGE = DetectorCase(MAGNETOMECHANICAL, VOLTAGE, 1)
MM_CURRENT = DetectorCase(MAGNETOMECHANICAL, CURRENT, 1)
EM_VOLTAGE = DetectorCase(ELECTROMECHANICAL, VOLTAGE)
EM_CURRENT = DetectorCase(ELECTROMECHANICAL, CURRENT)
ALL_CASES = (MM_VOLTAGE, MM_CURRENT, EM_VOLTAGE, EM_CURRENT)


# ---------------------------------------------------------------------------
# parameter containers
# ---------------------------------------------------------------------------

def _require_positive(obj, names):
    for n in names:
        v = getattr(obj, n)
        if v is None:
            continue
        if not (np.isfinite(v) and v > 0):
            raise ParameterError(f"{type(obj).__name__}.{n} must be finite and > 0, got {v!r}")


@dataclass(frozen=True)
class MagnetoMechParams:
    """Voice-coil (magnetomechanical) detector.

    Attributes
    ----------
    m, k : mass (kg) and spring constant (N/m)
    T_v : velocity transducer constant (T m = V s / m)
    L : voice-coil inductance (H)
    C_L : capacitance in parallel with the coil (F)
    L_M : readout inductance (H); only needed for current readout
    """

    m: float
    k: float
    T_v: float
    L: float
    C_L: float
    L_M: Optional[float] = None

    def __post_init__(self):
        _require_positive(self, ("m", "k", "T_v", "L", "C_L", "L_M"))
        if self.L_M is not None and not self.L_M < self.L:
            raise ParameterError("readout inductance L_M must be smaller than L")


@dataclass(frozen=True)
class ElectroMechParams:
    """Parallel-plate (electromechanical) detector in its full, biased form."""

    m: float
    k: float
    A: float
    d_0: float
    V_DC: float
    C_P: float
    L: float
    L_M: Optional[float] = None

    def __post_init__(self):
        _require_positive(self, ("m", "k", "A", "d_0", "C_P", "L", "L_M"))
        if not np.isfinite(self.V_DC) or self.V_DC < 0:
            raise ParameterError("V_DC must be finite and >= 0")

    @property
    def C_0(self) -> float:
        """Capacitance of the uncharged plates."""
        return EPS0 * self.A / self.d_0

    @property
    def pull_in_voltage(self) -> float:
        """Classic parallel-plate pull-in bias, sqrt(8 k d0^3 / (27 eps0 A))."""
        return math.sqrt(8.0 * self.k * self.d_0 ** 3 / (27.0 * EPS0 * self.A))


@dataclass(frozen=True)
class ReducedElectroMechParams:
    """Linearised electromechanical detector.

    ``k_eff`` is the electrostatically softened spring constant, ``T_x``
    the position transducer constant (C/m) and ``C_x0`` the plate
    capacitance at the operating point.
    """

    m: float
    k_eff: float
    T_x: float
    C_x0: float
    C_P: float
    L: float
    L_M: Optional[float] = None

    def __post_init__(self):
        _require_positive(self, ("m", "C_x0", "C_P", "L", "L_M"))
        if not (np.isfinite(self.k_eff) and self.k_eff > 0):
            raise ParameterError("k_eff must be > 0 (stable operating point)")
        if not np.isfinite(self.T_x):
            raise ParameterError("T_x must be finite")

    @property
    def C_eff(self) -> float:
        return self.C_x0 + self.C_P


@dataclass(frozen=True)
class CavityParams:
    """Parametric readout cavity.

    ``G`` is the linearised coupling (rad/s per C for charge coupling, per Wb
    for flux coupling).  ``G_x`` is the additional position coupling that
    only exists for voltage readout of the electromechanical detector.
    ``provenance`` may record bare couplings / drive strengths; it is never
    used in computation.
    """

    kappa: float
    G: float
    Delta: float = 0.0
    G_x: float = 0.0
    provenance: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not (np.isfinite(self.kappa) and self.kappa > 0):
            raise ParameterError("kappa must be finite and > 0")
        for n in ("G", "Delta", "G_x"):
            if not np.isfinite(getattr(self, n)):
                raise ParameterError(f"CavityParams.{n} must be finite")

    def with_coupling(self, G: float, G_x: Optional[float] = None) -> "CavityParams":
        return replace(self, G=G, G_x=self.G_x if G_x is None else G_x)


def check_case_params(case: DetectorCase, params, cavity: Optional[CavityParams] = None):
    """Raise :class:`ParameterError` if ``params``/``cavity`` do not suit ``case``."""
    if case.is_magnetic and not isinstance(params, MagnetoMechParams):
        raise ParameterError(f"{case.name} needs MagnetoMechParams, got {type(params).__name__}")
    if not case.is_magnetic and not isinstance(params, ReducedElectroMechParams):
        raise ParameterError(
            f"{case.name} needs ReducedElectroMechParams "
            f"(reduce ElectroMechParams with reduce_electromech), got {type(params).__name__}")
    if not case.is_voltage and params.L_M is None:
        raise ParameterError(f"{case.name} readout requires L_M")
    if cavity is not None and cavity.G_x != 0.0 and case != EM_VOLTAGE:
        raise ParameterError("G_x is only defined for electromechanical voltage readout")


# ---------------------------------------------------------------------------
# transducer constants and electromechanical equilibrium
# ---------------------------------------------------------------------------

def transducer_constant_v(N: float, R: float, B_r: float) -> float:
    """Voice-coil transducer constant ``T_v = 2 pi N R B_r`` (T m)."""
    if N < 0 or R <= 0:
        raise ParameterError("need N >= 0 and R > 0")
    return TWO_PI * N * R * B_r


def capacitance_at(x, A: float, d_0: float):
    """Parallel-plate capacitance ``eps0 A / (d_0 - x)``; ``x`` may be an array."""
    x = np.asarray(x, dtype=float)
    if np.any(x >= d_0):
        raise PlateContactError(f"displacement reaches the plate gap d_0={d_0:g} m")
    C = EPS0 * A / (d_0 - x)
    return float(C) if C.ndim == 0 else C


def potential(p: ElectroMechParams, Q, x):
    """Node potential V(Q, x) of the biased parallel-plate circuit (J)."""
    Q = np.asarray(Q, dtype=float)
    x = np.asarray(x, dtype=float)
    C = EPS0 * p.A / (p.d_0 - x)
    V = p.V_DC
    return 0.5 * p.k * x ** 2 + (Q ** 2 + 2 * C * V * Q - p.C_P * C * V ** 2) / (2 * (C + p.C_P))


def potential_gradient(p: ElectroMechParams, Q: float, x: float) -> np.ndarray:
    """Analytic gradient (dV/dQ, dV/dx)."""
    ea = EPS0 * p.A
    C = ea / (p.d_0 - x)
    Ce = C + p.C_P
    q = Q - p.C_P * p.V_DC
    dQ = (Q + C * p.V_DC) / Ce
    dx = p.k * x - q ** 2 * C ** 2 / (2 * ea * Ce ** 2)
    return np.array([dQ, dx])


def potential_hessian(p: ElectroMechParams, Q: float, x: float) -> np.ndarray:
    """Analytic Hessian of V(Q, x)."""
    ea = EPS0 * p.A
    C = ea / (p.d_0 - x)
    Ce = C + p.C_P
    q = Q - p.C_P * p.V_DC
    hQQ = 1.0 / Ce
    hQx = -q * C ** 2 / (ea * Ce ** 2)
    hxx = p.k - p.C_P * q ** 2 * C ** 3 / (ea ** 2 * Ce ** 3)
    return np.array([[hQQ, hQx], [hQx, hxx]])


@dataclass(frozen=True)
class EquilibriumPoint:
    Q_0: float
    x_0: float
    V_min: float
    hessian: np.ndarray = field(repr=False)
    iterations: int = 0
    grad_norm: float = 0.0

    @property
    def is_stable(self) -> bool:
        return bool(np.all(np.linalg.eigvalsh(self.hessian) > 0))


def _newton(p, Q, x, scales, tol, max_iter):
    """Damped Newton on the scaled potential; returns (Q, x, iters, gnorm)."""
    Qs, xs, Es = scales
    S = np.array([Qs, xs])

    def g_scaled(Q, x):
        return potential_gradient(p, Q, x) * S / Es

    g = g_scaled(Q, x)
    gn = float(np.max(np.abs(g)))
    for it in range(max_iter):
        if gn < tol:
            return Q, x, it, gn
        H = potential_hessian(p, Q, x) * np.outer(S, S) / Es
        lam = np.linalg.eigvalsh(H)
        if lam[0] <= 0:  # not convex here: shift towards gradient descent
            H = H + (abs(lam[0]) + 1e-3 * max(abs(lam[-1]), 1.0)) * np.eye(2)
        step = -np.linalg.solve(H, g)
        V0 = float(potential(p, Q, x)) / Es
        t = 1.0
        accepted = False
        for _ in range(60):
            Qn = Q + t * step[0] * Qs
            xn = x + t * step[1] * xs
            if xn < p.d_0:
                gnew = g_scaled(Qn, xn)
                gnn = float(np.max(np.abs(gnew)))
                Vn = float(potential(p, Qn, xn)) / Es
                # Near convergence V is flat to rounding, so also accept steps
                # that shrink the gradient.
                if Vn < V0 or gnn < gn:
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            raise ConvergenceError("line search failed in equilibrium solve")
        Q, x, g, gn = Qn, xn, gnew, gnn
    if gn < tol:
        return Q, x, max_iter, gn
    raise ConvergenceError(f"equilibrium solve did not converge in {max_iter} iterations "
                           f"(|grad|={gn:.3e})")


def find_equilibrium(p: ElectroMechParams, tol: float = 1e-12, max_iter: int = 200,
                     n_continuation: int = 8) -> EquilibriumPoint:
    """Locate the stable minimum of V(Q, x) reached continuously from zero bias.

    The bias is ramped from 0 to ``V_DC`` in ``n_continuation`` steps, each
    solved by damped Newton (analytic gradient and Hessian) warm-started from
    the previous one.  Work is done in natural units (x in d_0, energy in
    k d_0^2) where the tolerance applies to the infinity norm of the gradient.

    Raises
    ------
    UnstableBiasError
        if a step has no positive-definite stationary point (pull-in).
    ConvergenceError
        if Newton fails for reasons other than pull-in.
    """
    Es = p.k * p.d_0 ** 2
    scales = (math.sqrt(Es * p.C_0), p.d_0, Es)
    Q = x = 0.0
    iters = 0
    gn = 0.0
    for j in range(1, n_continuation + 1):
        pj = replace(p, V_DC=p.V_DC * j / n_continuation)
        if j == 1:
            Q = -pj.C_0 * pj.V_DC  # exact charge minimiser at x = 0
        try:
            Q, x, it, gn = _newton(pj, Q, x, scales, tol, max_iter)
        except ConvergenceError as exc:
            if pj.V_DC >= p.pull_in_voltage:
                raise UnstableBiasError(
                    f"bias {p.V_DC:g} V is beyond pull-in ({p.pull_in_voltage:g} V)",
                    p.V_DC, p.pull_in_voltage) from exc
            raise
        iters += it
        H = potential_hessian(pj, Q, x)
        Hs = H * np.outer([scales[0], scales[1]], [scales[0], scales[1]]) / Es
        if not np.all(np.linalg.eigvalsh(Hs) > 0):
            raise UnstableBiasError(
                f"stationary point at V_DC={pj.V_DC:g} V is a saddle (pull-in at "
                f"{p.pull_in_voltage:g} V)", p.V_DC, p.pull_in_voltage)
    return EquilibriumPoint(Q_0=float(Q), x_0=float(x), V_min=float(potential(p, Q, x)),
                            hessian=potential_hessian(p, Q, x), iterations=iters,
                            grad_norm=gn)


def transducer_constant_x(p: ElectroMechParams, eq: EquilibriumPoint) -> float:
    """Position transducer constant T_x (C/m) at the equilibrium ``eq``."""
    Cx = capacitance_at(eq.x_0, p.A, p.d_0)
    Ceff = Cx + p.C_P
    return p.C_P * (eq.Q_0 - p.C_P * p.V_DC) / (EPS0 * p.A) * (Cx / Ceff) ** 2


def branch_charge(p: ElectroMechParams, Q, x):
    """Charge on the movable capacitor, C(x)(Q - C_P V_DC)/(C(x) + C_P)."""
    C = capacitance_at(x, p.A, p.d_0)
    return C * (Q - p.C_P * p.V_DC) / (C + p.C_P)


def reduce_electromech(p: ElectroMechParams,
                       eq: Optional[EquilibriumPoint] = None) -> ReducedElectroMechParams:
    """Linearise the biased detector about its equilibrium."""
    if eq is None:
        eq = find_equilibrium(p)
    Cx = capacitance_at(eq.x_0, p.A, p.d_0)
    T_x = transducer_constant_x(p, eq)
    k_eff = p.k - (Cx + p.C_P) * T_x ** 2 / (Cx * p.C_P)
    if k_eff <= 0:
        raise UnstableBiasError("effective spring constant is not positive", p.V_DC,
                                p.pull_in_voltage)
    return ReducedElectroMechParams(m=p.m, k_eff=k_eff, T_x=T_x, C_x0=Cx, C_P=p.C_P,
                                    L=p.L, L_M=p.L_M)


# ---------------------------------------------------------------------------
# characteristic frequencies and susceptibilities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DerivedFrequencies:
    """Characteristic frequencies (rad/s).

    For the electromechanical detector ``omega_c``/``omega_l``/``delta`` hold
    omega_ce, omega_le and delta_x.  The squares are kept exactly as computed
    from the parameters; the frequencies themselves are their positive
    square roots.  ``delta_signed`` carries the sign of T_x (always positive
    for the magnetic detector), which is what enters the cross terms between
    charge and position couplings.
    """

    omega_m_sq: float
    omega_c_sq: float
    omega_l_sq: float  # nan when L_M is not given
    delta_sq: float
    delta_sign: float = 1.0

    @property
    def omega_m(self):
        return math.sqrt(self.omega_m_sq)

    @property
    def omega_c(self):
        return math.sqrt(self.omega_c_sq)

    @property
    def omega_l(self):
        return math.sqrt(self.omega_l_sq)

    @property
    def delta(self):
        return math.sqrt(self.delta_sq)

    @property
    def delta_signed(self):
        return self.delta_sign * self.delta

    # electromechanical aliases
    omega_ce = omega_c
    omega_le = omega_l
    delta_x = delta
    delta_v = delta

    def as_dict(self):
        return {"omega_m": self.omega_m, "omega_c": self.omega_c,
                "omega_l": self.omega_l, "delta": self.delta}


def derived_frequencies(case: DetectorCase, params) -> DerivedFrequencies:
    check_case_params(case, params)
    p = params
    if case.is_magnetic:
        wl2 = 1.0 / (p.L_M * p.C_L) if p.L_M is not None else float("nan")
        return DerivedFrequencies(p.k / p.m, 1.0 / (p.L * p.C_L), wl2,
                                  p.T_v ** 2 / (p.m * p.L))
    Ceff = p.C_eff
    wl2 = 1.0 / (p.L_M * Ceff) if p.L_M is not None else float("nan")
    return DerivedFrequencies(p.k_eff / p.m, 1.0 / (p.L * Ceff), wl2,
                              Ceff * p.T_x ** 2 / (p.m * p.C_P ** 2),
                              -1.0 if p.T_x < 0 else 1.0)


@dataclass(frozen=True)
class Susceptibilities:
    chi_kappa: np.ndarray
    chi_m: np.ndarray
    chi_m_prime: np.ndarray
    chi_lc: np.ndarray
    singular: np.ndarray  # True where any real response function hit a pole


def _inv_neg(den):
    """-1/den with +-inf (and a flag) where den == 0 exactly."""
    den = np.asarray(den, dtype=float)
    bad = den == 0
    with np.errstate(divide="ignore"):
        out = -1.0 / den
    return out, bad


def susceptibilities(case: DetectorCase, params, nu, kappa: float) -> Susceptibilities:
    """Cavity, mechanical and circuit susceptibilities at angular frequency ``nu``.

    ``chi_m_prime`` (the circuit-dressed mechanical response) is defined with
    delta_v for both detectors; it is only meaningful for the magnetic one.
    Exact real poles return infinities and are flagged in ``singular``.
    """
    f = derived_frequencies(case, params)
    nu = np.asarray(nu, dtype=float)
    n2 = nu ** 2
    chi_k = -np.sqrt(kappa) / (kappa / 2 + 1j * nu)
    chi_m, b1 = _inv_neg(n2 - f.omega_m_sq)
    chi_mp, b2 = _inv_neg(n2 - f.omega_m_sq - f.delta_sq)
    with np.errstate(invalid="ignore"):
        if case.is_magnetic and case.is_voltage:
            # delta^2 (1 - chi_m wm^2) == delta^2 nu^2 / (nu^2 - wm^2), written
            # to stay finite as long as nu != wm.
            den = n2 - f.omega_c_sq - f.delta_sq * (1 - chi_m * f.omega_m_sq)
            bad_extra = b1
        elif case.is_magnetic:
            den = n2 - f.omega_c_sq - f.omega_l_sq + f.delta_sq * f.omega_c_sq * chi_mp
            bad_extra = b2
        elif case.is_voltage:
            den = n2 - f.omega_c_sq + f.delta_sq * f.omega_c_sq * chi_m
            bad_extra = b1
        else:
            den = n2 - f.omega_c_sq - f.omega_l_sq + f.delta_sq * (f.omega_c_sq + f.omega_l_sq) * chi_m
            bad_extra = b1
    chi_lc, b3 = _inv_neg(den)
    singular = b1 | b3 | bad_extra | (b2 if (case.is_magnetic and not case.is_voltage) else False)
    return Susceptibilities(chi_k, chi_m, chi_mp, chi_lc, np.asarray(singular))


# ---------------------------------------------------------------------------
# reference parameter set
# ---------------------------------------------------------------------------

REF_KAPPA = TWO_PI * 1e6
REF_NU_STAR = TWO_PI * 1e6
REF_MASS = 1e-3
REF_OMEGA_M = TWO_PI * 10.0
REF_L = 10e-6
REF_L_M = 1e-9
REF_OMEGA_C = TWO_PI * 10e6
REF_C_P = 25e-15
REF_T_V = 2.0
REF_T_X = -1e-10
#: Plate capacitance at the operating point; gives omega_ce/2pi ~ 1.0006 MHz.
REF_C_X0 = 2.53e-9


def reference_magnetomechanical(**overrides) -> MagnetoMechParams:
    """Magnetic detector used for the reference noise curves."""
    kw = dict(m=REF_MASS, k=REF_MASS * REF_OMEGA_M ** 2, T_v=REF_T_V, L=REF_L,
              C_L=1.0 / (REF_L * REF_OMEGA_C ** 2), L_M=REF_L_M)
    kw.update(overrides)
    return MagnetoMechParams(**kw)


def reference_electromechanical(**overrides) -> ReducedElectroMechParams:
    """Electromechanical detector (already linearised) for the reference curves."""
    kw = dict(m=REF_MASS, k_eff=REF_MASS * REF_OMEGA_M ** 2, T_x=REF_T_X,
              C_x0=REF_C_X0, C_P=REF_C_P, L=REF_L, L_M=REF_L_M)
    kw.update(overrides)
    return ReducedElectroMechParams(**kw)


def reference_params(case: DetectorCase):
    return reference_magnetomechanical() if case.is_magnetic else reference_electromechanical()
