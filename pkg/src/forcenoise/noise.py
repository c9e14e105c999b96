"""Force-noise power spectral densities.

For a force estimator ``F_E = F_in + beta X_in + gamma Y_in`` driven by
vacuum quadratures with one-sided correlations 1/2 and a white thermal force
floor ``N_BM``, the force PSD is

    S_FF = |beta|^2 / 2 + |gamma|^2 / 2 + N_BM,

the three terms being measurement backaction, shot (imprecision) noise and
thermal noise.  Three routes to S_FF are provided:

* :func:`psd_numeric` -- from the matrix resolvent (:mod:`.dynamics`);
* :func:`psd_closed_form` -- explicit polynomial forms in the characteristic
  frequencies, including the position coupling ``G_x`` of the
  electromechanical voltage readout;
* :func:`psd_susceptibility_form` -- the compact forms written with the
  cavity/mechanical/circuit susceptibilities (``G_x`` neglected).

The SQL couplings of :func:`optimized_coupling` balance backaction and
shot noise of the susceptibility forms at a target frequency.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .constants import HBAR
from .dynamics import (
    build_system_matrix,
    coefficients_from_matrix,
    estimator_coefficients,
    mode_polynomial,
    pole_mask,
    real_poles,
)
from .errors import DegenerateOptimumError, ForceNoiseError, ParameterError, PoleSingularityError
from .params import (
    EM_VOLTAGE,
    CavityParams,
    DetectorCase,
    check_case_params,
    derived_frequencies,
    susceptibilities,
)


@dataclass(frozen=True)
class ThermalModel:
    """White Brownian force-noise floor ``N_BM`` in N^2/Hz (default: none)."""

    N_BM: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.N_BM) and self.N_BM >= 0):
            raise ParameterError("N_BM must be finite and >= 0")


NO_THERMAL = ThermalModel()


@dataclass
class NoiseSpectrum:
    """PSD components (N^2/Hz) on an angular-frequency grid (rad/s).

    ``flags`` marks points that are unreliable (near a pole, ill-conditioned
    solve, or failed evaluation); such points may hold NaN.
    """

    nu_grid: np.ndarray
    backaction: np.ndarray
    shot: np.ndarray
    thermal: np.ndarray
    flags: Optional[np.ndarray] = None
    label: str = ""
    notes: list = field(default_factory=list)

    def __post_init__(self):
        self.nu_grid = np.atleast_1d(np.asarray(self.nu_grid, dtype=float))
        n = self.nu_grid.shape
        self.backaction = np.broadcast_to(np.asarray(self.backaction, float), n).copy()
        self.shot = np.broadcast_to(np.asarray(self.shot, float), n).copy()
        self.thermal = np.broadcast_to(np.asarray(self.thermal, float), n).copy()
        if self.flags is None:
            self.flags = np.zeros(n, bool)

    @property
    def total(self) -> np.ndarray:
        return self.backaction + self.shot + self.thermal

    @property
    def freq_hz(self) -> np.ndarray:
        return self.nu_grid / (2 * np.pi)

    def __len__(self):
        return self.nu_grid.size

    def components(self):
        """``(total, backaction, shot, thermal)``."""
        return self.total, self.backaction, self.shot, self.thermal

    def to_csv(self, path=None) -> str:
        """CSV with columns ``freq_hz,total,backaction,shot,thermal`` (``%.12e``)."""
        buf = io.StringIO()
        buf.write("freq_hz,total,backaction,shot,thermal\n")
        cols = np.column_stack([self.freq_hz, *self.components()])
        for row in cols:
            buf.write(",".join("%.12e" % v for v in row) + "\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _spectrum(nu, ba, sh, thermal, label, flags=None):
    thermal = NO_THERMAL if thermal is None else thermal
    return NoiseSpectrum(nu, ba, sh, np.full(np.shape(nu), thermal.N_BM), flags, label)


def psd_numeric(case: DetectorCase, params, cavity: CavityParams,
                thermal: Optional[ThermalModel] = None, nu=None) -> NoiseSpectrum:
    """S_FF from the matrix resolvent; ``nu`` scalar or array (rad/s)."""
    nu = np.atleast_1d(np.asarray(nu, dtype=float))
    ts = estimator_coefficients(case, params, cavity, nu)
    ba = 0.5 * np.abs(ts.beta) ** 2
    sh = 0.5 * np.abs(ts.gamma) ** 2
    return _spectrum(nu, ba, sh, thermal, case.label, flags=ts.ill_conditioned)


def _closed_form_constants(case, params, cavity):
    if cavity.Delta != 0:
        raise ParameterError("closed forms are only valid at zero detuning")
    check_case_params(case, params, cavity)
    f = derived_frequencies(case, params)
    return dict(kap=cavity.kappa, G=cavity.G, Gx=cavity.G_x, m=params.m, L=params.L,
                wm2=f.omega_m_sq, wc2=f.omega_c_sq, wl2=f.omega_l_sq, d2=f.delta_sq,
                sml=float(np.sqrt(params.m * params.L)), dw=f.delta_signed * f.omega_c)


def _closed_form_eval(case, c, nu):
    """Backaction and shot terms for precomputed constants ``c``."""
    n2 = nu * nu
    kap, G, m, L = c["kap"], c["G"], c["m"], c["L"]
    wm2, wc2, wl2, d2 = c["wm2"], c["wc2"], c["wl2"], c["d2"]
    K = kap * kap / 4 + n2
    hb2 = HBAR ** 2
    if case.is_magnetic and case.is_voltage:
        poly = (n2 - wm2) * (n2 - wc2) - d2 * n2
        ba = hb2 * G ** 2 * kap * m * (n2 - wm2) ** 2 / (2 * L * d2 * n2 * K)
        sh = m * L * K * poly ** 2 / (2 * G ** 2 * kap * d2 * n2)
    elif case.is_magnetic:
        poly = (n2 - wm2) * (n2 - wc2 - wl2) - d2 * (n2 - wl2)
        ba = hb2 * G ** 2 * kap * m * L * (n2 - wm2 - d2) ** 2 / (2 * d2 * K)
        sh = m * K * poly ** 2 / (2 * G ** 2 * kap * L * d2 * wc2 ** 2)
    elif case.is_voltage:
        Gx, sml, dw = c["Gx"], c["sml"], c["dw"]
        poly = (n2 - wm2) * (n2 - wc2) - d2 * wc2
        sig = G * sml * dw - Gx * L * (n2 - wc2)
        num = G ** 2 * m * (n2 - wm2) - 2 * G * Gx * sml * dw + Gx ** 2 * L * (n2 - wc2)
        ba = hb2 * kap * num ** 2 / (2 * K * sig ** 2)
        sh = m ** 2 * L ** 2 * K * poly ** 2 / (2 * kap * sig ** 2)
    else:
        poly = (n2 - wm2) * (n2 - wc2 - wl2) - d2 * (wc2 + wl2)
        ba = hb2 * G ** 2 * kap * m * L * wc2 * (n2 - wm2 + d2) ** 2 / (2 * d2 * n2 * K)
        sh = m * K * poly ** 2 / (2 * G ** 2 * kap * L * d2 * wc2 * n2)
    return ba, sh


def _closed_form_terms(case, params, cavity, nu):
    c = _closed_form_constants(case, params, cavity)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        return _closed_form_eval(case, c, np.asarray(nu, dtype=float))


def closed_form_total_fn(case: DetectorCase, params, cavity: CavityParams,
                         thermal: Optional[ThermalModel] = None):
    """Fast callable ``nu -> S_FF`` (closed form) for use inside quadratures.

    Constants are computed once; the callable accepts scalars or arrays.
    """
    c = _closed_form_constants(case, params, cavity)
    nbm = (NO_THERMAL if thermal is None else thermal).N_BM

    def total(nu):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            ba, sh = _closed_form_eval(case, c, np.float64(nu) if np.ndim(nu) == 0
                                       else np.asarray(nu, dtype=float))
        return ba + sh + nbm

    return total


def psd_closed_form(case: DetectorCase, params, cavity: CavityParams,
                    thermal: Optional[ThermalModel] = None, nu=None) -> NoiseSpectrum:
    """Explicit S_FF in terms of the characteristic frequencies (zero detuning).

    The electromechanical voltage form keeps the ``G_x`` terms.  Points where
    a term diverges (``nu = 0`` for some cases, or a vanishing signal path)
    come back as ``inf`` and are flagged.
    """
    nu = np.atleast_1d(np.asarray(nu, dtype=float))
    ba, sh = _closed_form_terms(case, params, cavity, nu)
    flags = ~np.isfinite(ba) | ~np.isfinite(sh)
    return _spectrum(nu, ba, sh, thermal, case.label, flags)


def psd_susceptibility_form(case: DetectorCase, params, cavity: CavityParams,
                            thermal: Optional[ThermalModel] = None, nu=None) -> NoiseSpectrum:
    """S_FF written through chi_kappa, chi_m, chi_m' and chi_lc (``G_x`` -> 0)."""
    if cavity.Delta != 0:
        raise ParameterError("closed forms are only valid at zero detuning")
    check_case_params(case, params)
    nu = np.atleast_1d(np.asarray(nu, dtype=float))
    f = derived_frequencies(case, params)
    s = susceptibilities(case, params, nu, cavity.kappa)
    G, m, L = cavity.G, params.m, params.L
    ck2 = np.abs(s.chi_kappa) ** 2
    n2 = nu ** 2
    d2, wc2 = f.delta_sq, f.omega_c_sq
    hb2 = HBAR ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        if case.is_magnetic and case.is_voltage:
            ba = hb2 * G ** 2 * m * ck2 / (2 * L * d2 * s.chi_m ** 2 * n2)
            sh = m * L / (2 * G ** 2 * d2 * ck2 * s.chi_m ** 2 * s.chi_lc ** 2 * n2)
        elif case.is_magnetic:
            ba = hb2 * G ** 2 * m * L * ck2 / (2 * d2 * s.chi_m_prime ** 2)
            sh = m / (2 * G ** 2 * L * d2 * ck2 * s.chi_m_prime ** 2 * s.chi_lc ** 2 * wc2 ** 2)
        elif case.is_voltage:
            ba = hb2 * G ** 2 * m * ck2 / (2 * d2 * s.chi_m ** 2 * L * wc2)
            sh = m * L / (2 * G ** 2 * d2 * ck2 * s.chi_m ** 2 * s.chi_lc ** 2 * wc2)
        else:
            one = (1 - d2 * s.chi_m) ** 2
            ba = hb2 * G ** 2 * m * L * wc2 * ck2 * one / (2 * d2 * s.chi_m ** 2 * n2)
            sh = m / (2 * G ** 2 * L * d2 * ck2 * s.chi_m ** 2 * s.chi_lc ** 2 * wc2 * n2)
    flags = s.singular | ~np.isfinite(ba) | ~np.isfinite(sh)
    return _spectrum(nu, ba, sh, thermal, case.label, flags)


def backaction_zeros(case: DetectorCase, params, cavity: Optional[CavityParams] = None):
    """Positive frequencies (rad/s) where the backaction term vanishes exactly.

    Read off the closed-form numerators; for electromechanical voltage
    readout the zero moves with the position coupling ``G_x``.
    """
    f = derived_frequencies(case, params)
    wm2, wc2, d2 = f.omega_m_sq, f.omega_c_sq, f.delta_sq
    if case.is_magnetic and case.is_voltage:
        s = wm2
    elif case.is_magnetic:
        s = wm2 + d2
    elif case.is_voltage:
        G = 1.0 if cavity is None else cavity.G
        Gx = 0.0 if cavity is None else cavity.G_x
        m, L = params.m, params.L
        dw = f.delta_signed * f.omega_c
        s = ((G * G * m * wm2 + 2 * G * Gx * np.sqrt(m * L) * dw + Gx * Gx * L * wc2)
             / (G * G * m + Gx * Gx * L))
    else:
        s = wm2 - d2
    return np.array([np.sqrt(s)]) if s > 0 else np.array([])


def shot_zeros(case: DetectorCase, params):
    """Positive frequencies (rad/s) of the normal modes, where shot noise vanishes."""
    a1, a0 = mode_polynomial(case, params)
    disc = a1 * a1 - 4 * a0
    if disc < 0:
        return np.array([])
    q = 0.5 * (a1 + np.sqrt(disc))
    s = np.array([q, a0 / q])
    return np.sort(np.sqrt(s[s > 0]))


def zero_pairs(case: DetectorCase, params, cavity: Optional[CavityParams] = None):
    """Each backaction zero paired with the nearest shot-noise zero.

    Returns a list of ``(nu_b, gap)`` with ``gap = nu_b - nu_s`` (rad/s).
    The gap is evaluated from factored forms of the mode polynomial at the
    backaction zero, so it stays accurate even when the two zeros agree to
    more digits than double precision resolves (the plate detector with
    current readout is such a case).
    """
    f = derived_frequencies(case, params)
    wm2, wc2, d2 = f.omega_m_sq, f.omega_c_sq, f.delta_sq
    out = []
    for nu_b in backaction_zeros(case, params, cavity):
        sb = nu_b * nu_b
        if case.is_magnetic and case.is_voltage:
            poly = -d2 * sb                      # (s - wm2)(s - wc2) - d2 s at s = wm2
        elif case.is_magnetic:
            poly = -d2 * wc2                     # at s = wm2 + d2
        elif case.is_voltage:
            G = 1.0 if cavity is None else cavity.G
            Gx = 0.0 if cavity is None else cavity.G_x
            m, L = params.m, params.L
            dw = f.delta_signed * f.omega_c
            shift = ((2 * G * Gx * np.sqrt(m * L) * dw + Gx * Gx * L * (wc2 - wm2))
                     / (G * G * m + Gx * Gx * L))  # s_b - wm2
            poly = shift * (sb - wc2) - d2 * wc2
        else:
            poly = -d2 * sb                      # at s = wm2 - d2
        roots = shot_zeros(case, params) ** 2
        if roots.size == 0:
            continue
        k = int(np.argmin(np.abs(roots - sb)))
        other = roots[1 - k] if roots.size == 2 else np.nan
        # poly(s_b) = (s_b - s_near)(s_b - s_other)
        ds = poly / (sb - other) if np.isfinite(other) else sb - roots[k]
        nu_s = np.sqrt(roots[k])
        out.append((float(nu_b), float(ds / (nu_b + nu_s))))
    return out


def closed_form_components_fn(case: DetectorCase, params, cavity: CavityParams):
    """Callable ``nu -> (backaction, shot)`` from the closed forms."""
    c = _closed_form_constants(case, params, cavity)

    def comps(nu):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return _closed_form_eval(case, c, np.float64(nu) if np.ndim(nu) == 0
                                     else np.asarray(nu, dtype=float))

    return comps


def noise_features(case: DetectorCase, params, cavity: Optional[CavityParams] = None):
    """Sorted frequencies (rad/s) of backaction zeros and shot-noise zeros.

    Shot noise vanishes at the real normal modes of the detector (where the
    signal transfer diverges); these are the narrow features an integral
    over 1/S_FF has to resolve.
    """
    pts = np.concatenate([real_poles(case, params), backaction_zeros(case, params, cavity)])
    return np.unique(pts[np.isfinite(pts) & (pts > 0)])


def numeric_total_fn(case: DetectorCase, params, cavity: CavityParams,
                     thermal: Optional[ThermalModel] = None):
    """Callable ``nu -> S_FF`` from the matrix resolvent (matrix built once).

    Valid at any detuning; slower than :func:`closed_form_total_fn`.
    """
    mat = build_system_matrix(case, params, cavity)
    nbm = (NO_THERMAL if thermal is None else thermal).N_BM

    def total(nu):
        scalar = np.ndim(nu) == 0
        ts = coefficients_from_matrix(mat, cavity, np.atleast_1d(np.asarray(nu, float)))
        out = 0.5 * np.abs(ts.beta) ** 2 + 0.5 * np.abs(ts.gamma) ** 2 + nbm
        return out[0] if scalar else out

    return total


# ---------------------------------------------------------------------------
# SQL coupling
# ---------------------------------------------------------------------------

def optimized_coupling(case: DetectorCase, params, cavity_template: CavityParams,
                       nu_star: float) -> float:
    """Coupling that balances backaction and shot noise at ``nu_star`` (rad/s).

    Only ``kappa`` of ``cavity_template`` is used.  For the electromechanical
    voltage readout the balance is taken with the position coupling
    neglected; see :func:`sql_cavity` for the slaved ``G_x``.
    """
    check_case_params(case, params)
    f = derived_frequencies(case, params)
    s = susceptibilities(case, params, float(nu_star), cavity_template.kappa)
    ck2 = float(np.abs(s.chi_kappa) ** 2)
    lc = abs(float(s.chi_lc))
    L = params.L
    if bool(s.singular) or not np.isfinite(lc) or lc == 0:
        raise DegenerateOptimumError(
            f"{case.name}: circuit susceptibility is singular at the target frequency")
    if case.is_magnetic and case.is_voltage:
        G2 = L / (HBAR * ck2 * lc)
    elif case.is_magnetic:
        G2 = 1.0 / (HBAR * ck2 * lc * L * f.omega_c_sq)
    elif case.is_voltage:
        G2 = L / (HBAR * ck2 * lc)
    else:
        fac = abs(1.0 - f.delta_sq * float(s.chi_m))
        if fac == 0 or not np.isfinite(fac):
            raise DegenerateOptimumError(f"{case.name}: backaction vanishes at the target frequency")
        G2 = 1.0 / (HBAR * ck2 * lc * fac * L * f.omega_c_sq)
    if not (np.isfinite(G2) and G2 > 0):
        raise DegenerateOptimumError(f"{case.name}: no finite optimum at nu*={nu_star:g}")
    return float(np.sqrt(G2))


def sql_cavity(case: DetectorCase, params, kappa: float, nu_star: float,
               Delta: float = 0.0, include_G_x: bool = True) -> CavityParams:
    """Cavity with the SQL coupling at ``nu_star``.

    For electromechanical voltage readout the position coupling is slaved
    to the charge coupling, ``G_x = T_x G`` (when ``include_G_x``).
    """
    tmpl = CavityParams(kappa=kappa, G=1.0, Delta=Delta)
    G = optimized_coupling(case, params, tmpl, nu_star)
    Gx = params.T_x * G if (case == EM_VOLTAGE and include_G_x) else 0.0
    return CavityParams(kappa=kappa, G=G, Delta=Delta, G_x=Gx,
                        provenance={"nu_star": nu_star, "rule": "SQL balance"})


# ---------------------------------------------------------------------------
# optomechanical references
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OptomechRefParams:
    """Cavity optomechanics with direct position (G) or momentum (G') coupling."""

    m: float
    omega_m: float
    kappa: float
    mu: float = 0.0
    G: float = 1.0
    G_prime: Optional[float] = None

    def __post_init__(self):
        for n in ("m", "omega_m", "kappa", "G"):
            v = getattr(self, n)
            if not (np.isfinite(v) and v > 0):
                raise ParameterError(f"OptomechRefParams.{n} must be > 0")
        if self.mu < 0:
            raise ParameterError("damping mu must be >= 0")
        if self.G_prime is None:
            object.__setattr__(self, "G_prime", self.G / (self.m * self.kappa))


def _optomech_chis(p: OptomechRefParams, nu):
    chi_c = np.sqrt(p.kappa) / (-1j * nu + p.kappa / 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        chi_m = -1.0 / (p.m * (nu ** 2 - p.omega_m ** 2 + 1j * p.mu * nu))
    phase = (-1j * nu - p.kappa / 2) / (-1j * nu + p.kappa / 2)
    return chi_c, chi_m, phase


def optomech_estimator(mode: str, p: OptomechRefParams, nu):
    """``(beta, gamma)`` of the position- or velocity-coupled force estimator."""
    nu = np.asarray(nu, dtype=float)
    chi_c, chi_m, ph = _optomech_chis(p, nu)
    with np.errstate(divide="ignore", invalid="ignore"):
        if mode == "position":
            beta = -p.G * HBAR * chi_c
            gamma = ph / (p.G * chi_c * chi_m)
        elif mode == "velocity":
            if np.any(nu == 0):
                raise PoleSingularityError("velocity estimator is singular at nu = 0", nu=0.0)
            beta = -1j * p.G_prime * HBAR * chi_c * p.m * p.omega_m ** 2 / nu
            gamma = 1j * ph / (p.G_prime * p.m * nu * chi_c * chi_m)
        else:
            raise ParameterError(f"mode must be 'position' or 'velocity', got {mode!r}")
    return beta, gamma


def optomech_reference_psd(mode: str, p: OptomechRefParams,
                           thermal: Optional[ThermalModel] = None, nu=None) -> NoiseSpectrum:
    nu = np.atleast_1d(np.asarray(nu, dtype=float))
    beta, gamma = optomech_estimator(mode, p, nu)
    return _spectrum(nu, 0.5 * np.abs(beta) ** 2, 0.5 * np.abs(gamma) ** 2, thermal,
                     f"optomechanical-{mode}")


def optomech_optimized_coupling(m: float, omega_m: float, kappa: float, nu_star: float,
                                mu: float = 0.0) -> float:
    """Position coupling balancing backaction and shot noise at ``nu_star``."""
    p = OptomechRefParams(m=m, omega_m=omega_m, kappa=kappa, mu=mu, G=1.0)
    chi_c, chi_m, _ = _optomech_chis(p, float(nu_star))
    a_m = abs(chi_m)
    if not np.isfinite(a_m) or a_m == 0:
        raise DegenerateOptimumError("mechanical susceptibility singular at nu*")
    return float(1.0 / (np.sqrt(HBAR) * np.sqrt(a_m) * abs(chi_c)))


# ---------------------------------------------------------------------------
# batch evaluation and shape analysis
# ---------------------------------------------------------------------------

ENGINES = ("numeric", "closed-form", "susceptibility")


def noise_breakdown(case: DetectorCase, params, cavity: CavityParams,
                    thermal: Optional[ThermalModel] = None, nu_grid=(),
                    engine: str = "numeric", mask_poles: bool = True) -> NoiseSpectrum:
    """Evaluate S_FF on a grid, collecting per-point problems as flags.

    Failures at individual frequencies (exact poles, vanishing signal path)
    produce NaN entries with ``flags`` set instead of raising.
    """
    nu = np.atleast_1d(np.asarray(nu_grid, dtype=float))
    if nu.size == 0:
        return _spectrum(nu, np.zeros(0), np.zeros(0), thermal, case.label)
    fn = {"numeric": psd_numeric, "closed-form": psd_closed_form,
          "susceptibility": psd_susceptibility_form}.get(engine)
    if fn is None:
        raise ParameterError(f"unknown engine {engine!r}; choose from {ENGINES}")
    try:
        spec = fn(case, params, cavity, thermal, nu)
    except (ForceNoiseError, ArithmeticError):
        ba = np.full(nu.shape, np.nan)
        sh = np.full(nu.shape, np.nan)
        flags = np.ones(nu.shape, bool)
        for i, v in enumerate(nu):
            try:
                s1 = fn(case, params, cavity, thermal, v)
            except (ForceNoiseError, ArithmeticError):
                continue
            ba[i], sh[i], flags[i] = s1.backaction[0], s1.shot[0], s1.flags[0]
        spec = _spectrum(nu, ba, sh, thermal, case.label, flags)
    if mask_poles:
        near = pole_mask(case, params, nu)
        spec.flags = spec.flags | near
    spec.notes.append(f"engine={engine}")
    return spec


def fit_loglog_slope(nu, S) -> float:
    """Least-squares slope of log S against log nu."""
    x = np.log(np.asarray(nu, float))
    y = np.log(np.asarray(S, float))
    ok = np.isfinite(x) & np.isfinite(y)
    if ok.sum() < 2:
        raise ValueError("need at least two finite points for a slope fit")
    return float(np.polyfit(x[ok], y[ok], 1)[0])


def local_slope(fn, nu, rel: float = 1e-4) -> float:
    """Centered logarithmic derivative d ln fn / d ln nu at ``nu``."""
    a, b = nu * (1 - rel), nu * (1 + rel)
    return float((np.log(fn(b)) - np.log(fn(a))) / (np.log(b) - np.log(a)))
