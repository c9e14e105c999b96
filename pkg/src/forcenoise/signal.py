"""Impulse signal from a passing massive particle and matched-filter SNR.

A particle of mass ``m_dm`` passing the sensor of mass ``m`` at impact
parameter ``b`` and speed ``v`` exerts the transverse gravitational force

    F(t) = G_N m m_dm b / (b^2 + v^2 t^2)^(3/2),

a pulse of duration ``tau ~ b/v``.  With the unitary Fourier convention
``F(nu) = (2 pi)^-1/2 int F(t) e^{i nu t} dt`` its spectrum is

    F(nu) = sqrt(2/pi) G_N m m_dm |nu| / v^2 K1(b |nu| / v)          (exact)
          ~ sqrt(2/pi) G_N m m_dm / (b v) exp(-b |nu| / (2 v))      (approx)

and the optimal (matched-filter) SNR against a force PSD S(nu) is
``SNR^2 = int_0^inf |F(nu)|^2 / S(nu) dnu``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np
from scipy import integrate

from .bessel import x_k1
from .constants import G_NEWTON, HBAR, PLANCK_MASS, TWO_PI, V_DM
from .errors import ParameterError, QuadratureError

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class DmEncounter:
    """Fly-by geometry: candidate mass (kg), impact parameter (m), speed (m/s),
    sensor mass (kg)."""

    m_dm: float = PLANCK_MASS
    b: float = 1e-3
    v: float = V_DM
    m: float = 1e-3

    def __post_init__(self):
        if self.m_dm < 0 or not np.isfinite(self.m_dm):
            raise ParameterError("m_dm must be finite and >= 0")
        for n in ("b", "v", "m"):
            if not getattr(self, n) > 0:
                raise ParameterError(f"DmEncounter.{n} must be > 0")

    @property
    def tau(self) -> float:
        """Signal timescale b/v (s)."""
        return self.b / self.v

    @property
    def peak_force(self) -> float:
        """F(t=0) = G_N m m_dm / b^2 (N)."""
        return G_NEWTON * self.m * self.m_dm / self.b ** 2

    @property
    def spectral_scale(self) -> float:
        """Low-frequency spectral amplitude sqrt(2/pi) G_N m m_dm / (b v)."""
        return SQRT_2_OVER_PI * G_NEWTON * self.m * self.m_dm / (self.b * self.v)


def dm_force_time(e: DmEncounter, t):
    """Time-domain force (N)."""
    t = np.asarray(t, dtype=float)
    return G_NEWTON * e.m * e.m_dm * e.b / (e.b ** 2 + e.v ** 2 * t ** 2) ** 1.5


def dm_force_freq(e: DmEncounter, nu, form: str = "approx"):
    """Spectral amplitude of the pulse at angular frequency ``nu`` (rad/s).

    ``form='exact'`` uses the Bessel-function transform, ``'approx'`` the
    exponential approximation.  Both depend on ``|nu|`` only.
    """
    nu = np.abs(np.asarray(nu, dtype=float))
    x = e.b * nu / e.v
    if form == "exact":
        return e.spectral_scale * x_k1(x)
    if form == "approx":
        return e.spectral_scale * np.exp(-0.5 * x)
    raise ParameterError(f"form must be 'exact' or 'approx', got {form!r}")


@dataclass(frozen=True)
class SnrResult:
    snr_sq: float
    nu_min: float
    nu_max: float
    quadrature_error: float  # relative error estimate
    form: str = "approx"
    n_intervals: int = 1
    n_warnings: int = 0  # sub-intervals where the adaptive rule reported trouble

    @property
    def snr(self) -> float:
        return math.sqrt(self.snr_sq)


def default_nu_max(e: DmEncounter) -> float:
    """Integration cutoff 40 v/b: the approximate |F|^2 is down by e^-40 there."""
    return 40.0 * e.v / e.b


DEFAULT_NU_MIN = TWO_PI * 0.1


def dip_breakpoints(roots: Iterable[float], lo: float, hi: float, depth: int = 14):
    """Geometric breakpoints clustering around each frequency in ``roots``.

    Noise spectra with a backaction-evading zero have dips whose width shrinks
    with the shot-noise level; placing breakpoints at ``r (1 +- 10^-j)`` lets
    an adaptive rule resolve them.  Roots on or outside ``[lo, hi]`` still
    contribute the offsets that fall inside.
    """
    pts = []
    for r in roots:
        if not (np.isfinite(r) and r > 0):
            continue
        if lo < r < hi:
            pts.append(r)
        for j in range(1, depth + 1):
            for sgn in (-1.0, 1.0):
                q = r * (1.0 + sgn * 10.0 ** (-j))
                if lo < q < hi:
                    pts.append(q)
    return np.unique(np.array(pts, dtype=float))


def snr_opt(e: DmEncounter, psd: Callable[[np.ndarray], np.ndarray], form: str = "approx",
            nu_min: Optional[float] = None, nu_max: Optional[float] = None,
            rtol: float = 1e-6, breakpoints: Iterable[float] = (),
            n_decade_splits: int = 2) -> SnrResult:
    """Matched-filter SNR^2 = int |F(nu)|^2 / S(nu) dnu over [nu_min, nu_max].

    Integration runs over ``u = ln nu`` (integrand ``|F|^2 nu / S``) with
    adaptive Gauss-Kronrod quadrature on sub-intervals delimited by
    ``breakpoints`` and by a few points per decade.  ``psd`` maps an angular
    frequency (a numpy scalar) to the total force PSD (N^2/Hz); returning a
    one-element array is also accepted.
    """
    if e.m_dm == 0:
        return SnrResult(0.0, nu_min or DEFAULT_NU_MIN, nu_max or default_nu_max(e), 0.0, form)
    lo = DEFAULT_NU_MIN if nu_min is None else float(nu_min)
    hi = default_nu_max(e) if nu_max is None else float(nu_max)
    if not (0 < lo < hi):
        raise ParameterError("need 0 < nu_min < nu_max")
    ulo, uhi = math.log(lo), math.log(hi)
    ndec = max(1, int(math.ceil((uhi - ulo) / math.log(10.0) * n_decade_splits)))
    edges = set(np.linspace(ulo, uhi, ndec + 1).tolist())
    for bp in breakpoints:
        if lo < bp < hi:
            edges.add(math.log(bp))
    edges = np.array(sorted(edges))

    def integrand(u):
        nu = math.exp(u)
        S = float(np.asarray(psd(np.float64(nu)), dtype=float).reshape(-1)[0])
        if not S > 0:
            raise ParameterError(f"PSD must be positive, got {S!r} at nu={nu:g} rad/s")
        F = float(dm_force_freq(e, nu, form))
        return F * F * nu / S

    total = 0.0
    err = 0.0
    n_warn = 0
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        # Very narrow sub-intervals next to a noise zero can trigger roundoff
        # diagnostics although their contribution is negligible; the summed
        # error estimate below is what decides acceptance.
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", integrate.IntegrationWarning)
            val, abserr = integrate.quad(integrand, a, b, epsabs=0.0, epsrel=rtol * 0.1,
                                         limit=200)
        n_warn += sum(issubclass(w.category, integrate.IntegrationWarning) for w in caught)
        total += val
        err += abserr
    rel = err / total if total > 0 else 0.0
    if rel > rtol:
        raise QuadratureError(f"SNR quadrature error {rel:.2e} exceeds rtol={rtol:g}",
                              estimate=total, error=rel)
    return SnrResult(total, lo, hi, rel, form, len(edges) - 1, n_warn)


def white_noise_snr_sq(e: DmEncounter, S0: float) -> float:
    """Analytic SNR^2 for the approximate pulse against white noise S0."""
    return e.spectral_scale ** 2 * (e.v / e.b) / S0


def sql_benchmark(m_s: float, tau: float, peak_force: float):
    """Free-mass SQL force resolution sqrt(hbar m / tau^3) and (F_peak / dF_SQL)^2."""
    if not (m_s > 0 and tau > 0):
        raise ParameterError("need m_s > 0 and tau > 0")
    dF = math.sqrt(HBAR * m_s / tau ** 3)
    return dF, (peak_force / dF) ** 2


# ---------------------------------------------------------------------------
# detector SNR with near-coincident noise zeros
# ---------------------------------------------------------------------------

def near_zero_peak(e: DmEncounter, form: str, nu_b: float, gap: float, A: float, B: float,
                   N: float, lo: float, hi: float) -> float:
    """Integral of |F|^2 / S over ``[lo, hi]`` for the local model
    ``S = A (nu - nu_b)^2 + B (nu - nu_b + gap)^2 + N``.

    The model describes the noise next to a backaction zero at ``nu_b`` and a
    shot-noise zero at ``nu_b - gap``; |F|^2 is taken constant over the
    (narrow) window.
    """
    AB = A + B
    c = nu_b - B * gap / AB  # minimum of S
    s_min = A * B / AB * gap * gap + N
    if not s_min > 0:
        raise ParameterError("noise has an exact double zero; the SNR integral diverges")
    k = math.sqrt(AB / s_min)
    F = float(dm_force_freq(e, nu_b, form))
    return F * F * (math.atan((hi - c) * k) - math.atan((lo - c) * k)) / math.sqrt(AB * s_min)


@dataclass(frozen=True)
class CaseSnr:
    result: SnrResult
    peak_contribution: float  # part of snr_sq obtained from the local model
    peaks: tuple  # (nu_b, gap) pairs treated analytically

    @property
    def snr_sq(self) -> float:
        return self.result.snr_sq


def _bridge_poles(psd, eps: float = 1e-9, eps_max: float = 1e-6):
    """Wrap a resolvent-based PSD so evaluations at normal modes are bridged.

    S_FF is smooth through the normal modes of the coupled system, but the
    resolvent is singular to working precision in a narrow band around each
    of them.  A point inside such a band is replaced by the mean of the
    values at ``nu (1 +- e)``, with ``e`` growing from ``eps`` by factors of 4
    until both neighbours solve (at most ``eps_max``).  The number of
    bridged points is kept in ``wrapped.bridged``.
    """
    from .errors import PoleSingularityError

    def wrapped(nu):
        try:
            return psd(nu)
        except PoleSingularityError:
            wrapped.bridged += 1
            e = eps
            while True:
                try:
                    return 0.5 * (psd(nu * (1.0 + e)) + psd(nu * (1.0 - e)))
                except PoleSingularityError:
                    e *= 4.0
                    if e > eps_max:
                        raise

    wrapped.bridged = 0
    return wrapped


def case_snr(case, params, cavity, e: DmEncounter, thermal=None, form: str = "approx",
             nu_min: Optional[float] = None, nu_max: Optional[float] = None,
             rtol: float = 1e-6, engine: str = "closed-form",
             resolve_rel: float = 1e-9, window_rel: float = 1e-6) -> CaseSnr:
    """Matched-filter SNR^2 for a detector case.

    Backaction and shot noise each vanish at isolated frequencies.  Where a
    backaction zero and a shot-noise zero lie closer than ``resolve_rel``
    (relative), 1/S_FF forms a spike too narrow to sample in double
    precision; a window of relative half-width ``window_rel`` around it is
    integrated with the local quadratic model (:func:`near_zero_peak`) and the
    rest numerically.  ``engine`` selects the PSD route for the numerical
    part ('closed-form' or 'numeric').
    """
    from .noise import (
        NO_THERMAL,
        closed_form_components_fn,
        closed_form_total_fn,
        noise_features,
        numeric_total_fn,
        zero_pairs,
    )

    thermal = NO_THERMAL if thermal is None else thermal
    feats = noise_features(case, params, cavity)
    lo = min(DEFAULT_NU_MIN, 1e-3 * feats.min()) if nu_min is None else float(nu_min)
    hi = default_nu_max(e) if nu_max is None else float(nu_max)
    if engine == "closed-form":
        psd = closed_form_total_fn(case, params, cavity, thermal)
        depth = 14
    elif engine == "numeric":
        psd = _bridge_poles(numeric_total_fn(case, params, cavity, thermal))
        depth = 10
    else:
        raise ParameterError(f"unknown engine {engine!r}")

    comps = closed_form_components_fn(case, params, cavity)
    peaks, windows = [], []
    peak_sum = 0.0
    for nu_b, gap in zero_pairs(case, params, cavity):
        if not (lo < nu_b < hi) or abs(gap) >= resolve_rel * nu_b:
            continue
        h = window_rel * nu_b
        # symmetric curvature probes cancel the first-order asymmetry of S
        d = h
        nu_s = nu_b - gap
        A = 0.5 * float(comps(nu_b + d)[0] + comps(nu_b - d)[0]) / d ** 2
        B = 0.5 * float(comps(nu_s + d)[1] + comps(nu_s - d)[1]) / d ** 2
        w_lo, w_hi = nu_b - h, nu_b + h
        peak_sum += near_zero_peak(e, form, nu_b, gap, A, B, thermal.N_BM, w_lo, w_hi)
        peaks.append((nu_b, gap))
        windows.append((w_lo, w_hi))

    pieces = [(lo, hi)]
    for w_lo, w_hi in sorted(windows):
        a, b = pieces.pop()
        pieces += [(a, w_lo), (w_hi, b)]
    total = peak_sum
    err = 0.0
    n_int = 0
    n_warn = 0
    for a, b in pieces:
        bps = dip_breakpoints(list(feats) + [p for w in windows for p in w], a, b, depth)
        r = snr_opt(e, psd, form=form, nu_min=a, nu_max=b, rtol=rtol, breakpoints=bps)
        total += r.snr_sq
        err += r.quadrature_error * r.snr_sq
        n_int += r.n_intervals
        n_warn += r.n_warnings
    rel = err / total if total > 0 else 0.0
    n_warn += getattr(psd, "bridged", 0)
    res = SnrResult(total, lo, hi, rel, form, n_int, n_warn)
    return CaseSnr(res, peak_sum, tuple(peaks))
