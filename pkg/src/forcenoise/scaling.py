"""Size scaling of the voice-coil detector and the resulting impulse SNR.

A cylindrical magnetic test mass of radius ``R`` and height ``h = 40 R``
carries a coil of turn density ``n`` in a fixed radial field ``B``:

    m = rho pi R^2 h,   N = n h,   T_v = 2 pi N R B,   L = mu0 N^2 pi R^2 / h,

the readout inductance keeps ``L / L_M = 1e4``, the circuit capacitance
follows from a fixed characteristic impedance, and the target frequency of
the SQL coupling and the impact parameter of the passing particle scale as
``1/R`` and ``R``.  :func:`radius_sweep` integrates the matched-filter SNR^2
for voltage and current readout, for an optomechanical position-sensing
reference, and the free-mass SQL benchmark.

Modelling choices that the scaling rules leave open (see ``ScalingConfig``):

* the spring constant is held at its ``R_base`` value (``spring='fixed'``),
  so the mechanical resonance falls as ``R^-3/2``; ``'scaled'`` keeps
  ``omega_m`` fixed instead;
* for current readout the characteristic impedance refers to the readout
  loop, ``C_L = L_M / Z0_x^2`` (``current_impedance='L_M'``); ``'L'`` uses the
  coil inductance instead.
"""

from __future__ import annotations

import io
import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .constants import HBAR, MU0, PLANCK_MASS, TWO_PI, V_DM
from .errors import ForceNoiseError, ParameterError
from .noise import (
    OptomechRefParams,
    noise_features as _noise_features,
    fit_loglog_slope,
    optomech_optimized_coupling,
    sql_cavity,
)
from .params import (
    CURRENT,
    MM_CURRENT,
    MM_VOLTAGE,
    VOLTAGE,
    CavityParams,
    MagnetoMechParams,
    transducer_constant_v,
)
from .signal import (
    DEFAULT_NU_MIN,
    DmEncounter,
    SnrResult,
    case_snr,
    dip_breakpoints,
    snr_opt,
    sql_benchmark,
)

SWEEP_COLUMNS = ("snr2_voltage", "snr2_current", "snr2_position", "snr2_sql")


@dataclass(frozen=True)
class ScalingConfig:
    """Scaling rules; defaults reproduce the 1 mm reference detector."""

    rho: float = 7500.0            # kg/m^3
    h_over_R: float = 40.0
    n: float = 7725.0              # turns per metre
    B: float = 1.0                 # T
    Z0_v: float = TWO_PI * 1e2     # ohm
    Z0_x: float = TWO_PI * 1.0     # ohm
    L_over_LM: float = 1e4
    nu_star_base: float = TWO_PI * 1e6
    nu_star_position_base: float = TWO_PI * 1e5
    R_base: float = 1e-3           # m
    b_over_R: float = 1.0
    kappa: float = TWO_PI * 1e6
    omega_m_base: float = TWO_PI * 10.0
    m_dm: float = PLANCK_MASS
    v: float = V_DM
    spring: str = "fixed"          # 'fixed' k, or 'scaled' (fixed omega_m)
    current_impedance: str = "L_M"  # 'L_M' or 'L'
    nu_min: float = DEFAULT_NU_MIN
    rtol: float = 1e-6

    def __post_init__(self):
        for n in ("rho", "h_over_R", "n", "B", "Z0_v", "Z0_x", "L_over_LM", "nu_star_base",
                  "nu_star_position_base", "R_base", "b_over_R", "kappa", "omega_m_base",
                  "v", "nu_min", "rtol"):
            v = getattr(self, n)
            if not (np.isfinite(v) and v > 0):
                raise ParameterError(f"ScalingConfig.{n} must be finite and > 0, got {v!r}")
        if self.m_dm < 0:
            raise ParameterError("ScalingConfig.m_dm must be >= 0")
        if self.spring not in ("fixed", "scaled"):
            raise ParameterError("spring must be 'fixed' or 'scaled'")
        if self.current_impedance not in ("L_M", "L"):
            raise ParameterError("current_impedance must be 'L_M' or 'L'")
        if self.L_over_LM <= 1:
            raise ParameterError("L_over_LM must exceed 1")


@dataclass(frozen=True)
class Geometry:
    R: float
    h: float
    m: float
    N: float
    T_v: float
    L: float


def geometry(R: float, cfg: ScalingConfig) -> Geometry:
    if not (np.isfinite(R) and R > 0):
        raise ParameterError(f"radius must be > 0, got {R!r}")
    h = cfg.h_over_R * R
    m = cfg.rho * math.pi * R ** 2 * h
    N = cfg.n * h
    T_v = transducer_constant_v(N, R, cfg.B)
    L = MU0 * N ** 2 * math.pi * R ** 2 / h
    return Geometry(R, h, m, N, T_v, L)


def spring_constant(R: float, cfg: ScalingConfig) -> float:
    if cfg.spring == "fixed":
        return geometry(cfg.R_base, cfg).m * cfg.omega_m_base ** 2
    return geometry(R, cfg).m * cfg.omega_m_base ** 2


@dataclass(frozen=True)
class ScaledDetector:
    R: float
    readout: str
    geometry: Geometry
    params: MagnetoMechParams
    cavity: CavityParams
    encounter: DmEncounter
    nu_star: float

    @property
    def case(self):
        return MM_VOLTAGE if self.readout == VOLTAGE else MM_CURRENT


def scale_parameters(R: float, cfg: Optional[ScalingConfig] = None,
                     readout: str = VOLTAGE) -> ScaledDetector:
    """Full detector, SQL cavity and encounter for radius ``R`` (m)."""
    cfg = cfg or ScalingConfig()
    if readout not in (VOLTAGE, CURRENT):
        raise ParameterError(f"readout must be 'voltage' or 'current', got {readout!r}")
    g = geometry(R, cfg)
    L_M = g.L / cfg.L_over_LM
    if readout == VOLTAGE:
        C_L = g.L / cfg.Z0_v ** 2
    elif cfg.current_impedance == "L_M":
        C_L = L_M / cfg.Z0_x ** 2
    else:
        C_L = g.L / cfg.Z0_x ** 2
    p = MagnetoMechParams(m=g.m, k=spring_constant(R, cfg), T_v=g.T_v, L=g.L, C_L=C_L, L_M=L_M)
    nu_star = cfg.nu_star_base * cfg.R_base / R
    case = MM_VOLTAGE if readout == VOLTAGE else MM_CURRENT
    cav = sql_cavity(case, p, cfg.kappa, nu_star)
    enc = DmEncounter(m_dm=cfg.m_dm, b=cfg.b_over_R * R, v=cfg.v, m=g.m)
    return ScaledDetector(R, readout, g, p, cav, enc, nu_star)


@dataclass(frozen=True)
class ScaledReference:
    R: float
    params: OptomechRefParams
    encounter: DmEncounter
    nu_star: float


def scale_position_reference(R: float, cfg: Optional[ScalingConfig] = None) -> ScaledReference:
    """Undamped optomechanical position sensor of the same mass and spring."""
    cfg = cfg or ScalingConfig()
    g = geometry(R, cfg)
    omega_m = math.sqrt(spring_constant(R, cfg) / g.m)
    nu_star = cfg.nu_star_position_base * cfg.R_base / R
    G = optomech_optimized_coupling(g.m, omega_m, cfg.kappa, nu_star, mu=0.0)
    p = OptomechRefParams(m=g.m, omega_m=omega_m, kappa=cfg.kappa, mu=0.0, G=G)
    enc = DmEncounter(m_dm=cfg.m_dm, b=cfg.b_over_R * R, v=cfg.v, m=g.m)
    return ScaledReference(R, p, enc, nu_star)


# ---------------------------------------------------------------------------
# noise-spectrum features that the SNR quadrature must resolve
# ---------------------------------------------------------------------------

def noise_features(sd: ScaledDetector):
    """Frequencies (rad/s) where backaction or shot noise of ``sd`` vanish."""
    return [float(r) for r in _noise_features(sd.case, sd.params, sd.cavity)]


def _nu_min(cfg, roots):
    """Lower integration limit: the configured one, or well below any feature."""
    return min(cfg.nu_min, 1e-3 * min(roots)) if roots else cfg.nu_min


def detector_snr(sd: ScaledDetector, cfg: Optional[ScalingConfig] = None) -> SnrResult:
    cfg = cfg or ScalingConfig()
    lo = _nu_min(cfg, noise_features(sd))
    hi = 40.0 * sd.encounter.v / sd.encounter.b
    return case_snr(sd.case, sd.params, sd.cavity, sd.encounter, form="approx",
                    nu_min=lo, nu_max=hi, rtol=cfg.rtol).result


def position_psd_fn(p: OptomechRefParams):
    """Fast total PSD of the undamped position reference."""
    kap, m, wm2, G = p.kappa, p.m, p.omega_m ** 2, p.G
    if p.mu != 0:
        raise ParameterError("the fast position PSD assumes mu = 0")

    def total(nu):
        ck2 = kap / (kap * kap / 4 + nu * nu)
        with np.errstate(divide="ignore"):
            chim = 1.0 / (m * (nu * nu - wm2))
        return 0.5 * G * G * HBAR ** 2 * ck2 + 0.5 / (G * G * ck2 * chim * chim)

    return total


def position_snr(ref: ScaledReference, cfg: Optional[ScalingConfig] = None) -> SnrResult:
    cfg = cfg or ScalingConfig()
    roots = [ref.params.omega_m]
    lo = _nu_min(cfg, roots)
    hi = 40.0 * ref.encounter.v / ref.encounter.b
    bps = dip_breakpoints(roots + [ref.nu_star], lo, hi)
    return snr_opt(ref.encounter, position_psd_fn(ref.params), form="approx",
                   nu_min=lo, nu_max=hi, rtol=cfg.rtol, breakpoints=bps)


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

@dataclass
class SweepTable:
    R: np.ndarray
    snr2: dict  # column name -> array
    failures: list = field(default_factory=list)  # (R, column, message)
    elapsed: float = 0.0

    def column(self, name):
        return self.snr2[name]

    def __len__(self):
        return self.R.size

    def slopes(self, R_lo: float = 1e-2, R_hi: float = 1.0) -> dict:
        """Log-log slope of each SNR^2 column over ``R_lo <= R <= R_hi``."""
        sel = (self.R >= R_lo * (1 - 1e-12)) & (self.R <= R_hi * (1 + 1e-12))
        out = {}
        for c in SWEEP_COLUMNS:
            y = self.snr2[c][sel]
            ok = np.isfinite(y) & (y > 0)
            out[c] = fit_loglog_slope(self.R[sel][ok], y[ok]) if ok.sum() >= 2 else float("nan")
        return out

    def success_fraction(self) -> float:
        if self.R.size == 0:
            return 0.0
        bad = {r for r, _, _ in self.failures}
        return 1.0 - len(bad) / self.R.size

    def to_csv(self, path=None, summary: bool = True) -> str:
        buf = io.StringIO()
        buf.write("R_m," + ",".join(SWEEP_COLUMNS) + "\n")
        for i, R in enumerate(self.R):
            row = [R] + [self.snr2[c][i] for c in SWEEP_COLUMNS]
            buf.write(",".join("%.12e" % v for v in row) + "\n")
        if summary:
            if self.R.size >= 2:
                for c, s in self.slopes(R_lo=self.R.min(), R_hi=self.R.max()).items():
                    buf.write("# slope %s %.12e\n" % (c, s))
            for R, col, msg in self.failures:
                buf.write("# failed R=%.12e %s: %s\n" % (R, col, msg))
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def sweep_point(R: float, cfg: ScalingConfig):
    """SNR^2 for the four curves at one radius; failures come back as messages."""
    vals, errs = {}, []
    jobs = {
        "snr2_voltage": lambda: detector_snr(scale_parameters(R, cfg, VOLTAGE), cfg).snr_sq,
        "snr2_current": lambda: detector_snr(scale_parameters(R, cfg, CURRENT), cfg).snr_sq,
        "snr2_position": lambda: position_snr(scale_position_reference(R, cfg), cfg).snr_sq,
        "snr2_sql": lambda: sql_point(R, cfg),
    }
    for name, job in jobs.items():
        try:
            vals[name] = float(job())
        except (ForceNoiseError, ArithmeticError, ValueError) as exc:
            vals[name] = float("nan")
            errs.append((R, name, f"{type(exc).__name__}: {exc}"))
    return vals, errs


def sql_point(R: float, cfg: ScalingConfig) -> float:
    g = geometry(R, cfg)
    enc = DmEncounter(m_dm=cfg.m_dm, b=cfg.b_over_R * R, v=cfg.v, m=g.m)
    return sql_benchmark(g.m, enc.tau, enc.peak_force)[1]


def radius_sweep(R_grid: Sequence[float], cfg: Optional[ScalingConfig] = None) -> SweepTable:
    """SNR^2 of the four curves on ``R_grid`` (sorted ascending in the output)."""
    cfg = cfg or ScalingConfig()
    R = np.sort(np.atleast_1d(np.asarray(R_grid, dtype=float)))
    if R.size == 0:
        raise ParameterError("empty radius grid")
    if np.any(~np.isfinite(R)) or np.any(R <= 0):
        raise ParameterError("radii must be finite and > 0")
    t0 = time.perf_counter()
    cols = {c: np.full(R.size, np.nan) for c in SWEEP_COLUMNS}
    failures = []
    for i, r in enumerate(R):
        vals, errs = sweep_point(float(r), cfg)
        for c in SWEEP_COLUMNS:
            cols[c][i] = vals[c]
        failures.extend(errs)
    return SweepTable(R, cols, failures, time.perf_counter() - t0)


def gap_db(snr2_a, snr2_b, convention: str = "amplitude"):
    """Gap between two SNR^2 values in dB.

    ``'amplitude'`` quotes the ratio of SNRs, ``10 log10(SNR_a/SNR_b)``;
    ``'power'`` quotes the ratio of SNR^2, ``10 log10(SNR^2_a/SNR^2_b)``
    (twice as large).
    """
    r = np.asarray(snr2_a, dtype=float) / np.asarray(snr2_b, dtype=float)
    if convention == "amplitude":
        return 5.0 * np.log10(r)
    if convention == "power":
        return 10.0 * np.log10(r)
    raise ParameterError("convention must be 'amplitude' or 'power'")


def gaps_at(R: float, cfg: Optional[ScalingConfig] = None, convention: str = "amplitude") -> dict:
    """Voltage/current gaps against the position reference and the SQL at ``R``."""
    cfg = cfg or ScalingConfig()
    vals, errs = sweep_point(R, cfg)
    if errs:
        raise ForceNoiseError("; ".join(m for _, _, m in errs))
    v, c, p, s = (vals[k] for k in SWEEP_COLUMNS)
    return {
        "voltage_vs_position": float(gap_db(v, p, convention)),
        "current_vs_position": float(gap_db(c, p, convention)),
        "voltage_vs_sql": float(gap_db(v, s, convention)),
        "current_vs_sql": float(gap_db(c, s, convention)),
    }
