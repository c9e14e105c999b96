"""Command-line interface.

Subcommands::

    forcenoise psd --case mm-voltage --params configs/reference.cfg --grid 1:1e10:2000:log --out mmv.csv
    forcenoise snr --params configs/reference.cfg [--case em-current ...] [--white-noise S0]
    forcenoise sweep --params configs/reference.cfg --out sweep.csv [--svg sweep.svg]
    forcenoise equilibrium --params configs/plates.cfg
    forcenoise matrix --case mm-current --gauge 2 --params configs/reference.cfg

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure,
3 disagreement between independent evaluation routes.
"""

from __future__ import annotations

import argparse
import io
import logging
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import config as cfgmod
from .constants import TWO_PI
from .errors import ConfigError, ForceNoiseError, ParameterError
from .noise import (
    ENGINES,
    noise_breakdown,
    noise_features,
)
from .params import ALL_CASES, DetectorCase, find_equilibrium, transducer_constant_x
from .dynamics import build_system_matrix, pole_mask
from .signal import case_snr, snr_opt, white_noise_snr_sq

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_MISMATCH = 0, 1, 2, 3

log = logging.getLogger("forcenoise")


class UsageError(Exception):
    pass


class MismatchError(Exception):
    pass


@dataclass(frozen=True)
class GridSpec:
    f_min: float
    f_max: float
    points: int
    spacing: str = "log"

    def frequencies_hz(self) -> np.ndarray:
        if self.spacing == "log":
            return np.logspace(np.log10(self.f_min), np.log10(self.f_max), self.points)
        return np.linspace(self.f_min, self.f_max, self.points)

    def angular(self) -> np.ndarray:
        """Grid in rad/s (the single Hz -> rad/s conversion)."""
        return TWO_PI * self.frequencies_hz()


def parse_grid(spec: str) -> GridSpec:
    """``'min:max:points[:log|lin]'`` with frequencies in Hz."""
    parts = spec.split(":")
    if len(parts) not in (3, 4):
        raise UsageError(f"grid must look like MIN:MAX:POINTS[:log|lin], got {spec!r}")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"malformed grid {spec!r}") from None
    spacing = parts[3] if len(parts) == 4 else "log"
    if spacing not in ("log", "lin"):
        raise UsageError(f"grid spacing must be 'log' or 'lin', got {spacing!r}")
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
        raise UsageError("grid needs MIN < MAX")
    if n < 2:
        raise UsageError("grid needs at least 2 points")
    if spacing == "log" and lo <= 0:
        raise UsageError("log grid needs MIN > 0")
    return GridSpec(lo, hi, n, spacing)


def parse_case(name: str, gauge: int) -> DetectorCase:
    try:
        return DetectorCase.parse(name, gauge)
    except ParameterError as exc:
        raise UsageError(str(exc)) from None


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", newline=""), True


def _emit(text: str, path):
    fh, close = _open_out(path)
    try:
        fh.write(text)
    finally:
        if close:
            fh.close()


def _max_rel_diff(a, b):
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.abs(a - b) / np.maximum(np.abs(a), np.abs(b))
    d = np.where((a == 0) & (b == 0), 0.0, d)
    return d


# ---------------------------------------------------------------------------
# psd
# ---------------------------------------------------------------------------

def cmd_psd(args) -> int:
    grid = parse_grid(args.grid)
    case = parse_case(args.case, args.gauge)
    conf = cfgmod.load_config(args.params)
    params = cfgmod.detector_params(conf, case)
    cavity = cfgmod.cavity_params(conf, case, params)
    thermal = cfgmod.thermal_model(conf)
    nu = grid.angular()
    spec = noise_breakdown(case, params, cavity, thermal, nu, engine=args.engine)
    near = pole_mask(case, params, nu)
    if near.any():
        log.warning("%d grid point(s) lie within 1e-3 of a pole of %s and are excluded "
                    "from the cross-check", int(near.sum()), case.name)
    other = spec.flags & ~near
    if other.any():
        log.warning("%d grid point(s) flagged (ill-conditioned or failed)", int(other.sum()))
    if args.cross_check:
        ref_engine = "closed-form" if args.engine != "closed-form" else "numeric"
        if cavity.Delta != 0:
            log.warning("cross-check skipped: closed forms need zero detuning")
        else:
            ref = noise_breakdown(case, params, cavity, thermal, nu, engine=ref_engine)
            ok = ~(spec.flags | ref.flags)
            worst, where = 0.0, None
            for a, b in ((spec.total, ref.total), (spec.backaction, ref.backaction),
                         (spec.shot, ref.shot)):
                d = np.where(ok, _max_rel_diff(a, b), 0.0)
                i = int(np.nanargmax(d)) if d.size else 0
                if d.size and d[i] > worst:
                    worst, where = float(d[i]), nu[i] / TWO_PI
            if worst > args.tolerance:
                raise MismatchError(
                    f"{args.engine} and {ref_engine} disagree: max relative difference "
                    f"{worst:.3e} at {where:.6e} Hz (tolerance {args.tolerance:g})")
            log.info("cross-check vs %s: max relative difference %.3e", ref_engine, worst)
    _emit(spec.to_csv(), args.out)
    if args.svg:
        from .plotting import plot_spectrum

        plot_spectrum([spec], args.svg, title=case.label)
    return EXIT_OK


# ---------------------------------------------------------------------------
# snr
# ---------------------------------------------------------------------------

SNR_HEADER = "case,snr_sq,nu_min_hz,nu_max_hz,quadrature_error\n"


def cmd_snr(args) -> int:
    conf = cfgmod.load_config(args.params)
    conf.require("signal")
    form = args.form or conf.get("signal", "form", "approx")
    if form not in ("approx", "exact"):
        raise ConfigError("form must be 'approx' or 'exact'", path=conf.path)
    rtol = conf.get("signal", "rtol", 1e-6)
    nu_min = conf.get("signal", "nu_min_hz")
    nu_max = conf.get("signal", "nu_max_hz")
    nu_min = None if nu_min is None else TWO_PI * nu_min
    nu_max = None if nu_max is None else TWO_PI * nu_max
    white = args.white_noise if args.white_noise is not None else conf.get("signal", "white_noise")
    buf = io.StringIO()
    buf.write(SNR_HEADER)
    if white is not None:
        if not white > 0:
            raise UsageError("white-noise level must be > 0")
        enc = cfgmod.encounter(conf)
        res = snr_opt(enc, lambda nu: white, form=form, nu_min=nu_min, nu_max=nu_max, rtol=rtol)
        buf.write("white-noise,%.12e,%.12e,%.12e,%.12e\n"
                  % (res.snr_sq, res.nu_min / TWO_PI, res.nu_max / TWO_PI, res.quadrature_error))
        if form == "approx":
            buf.write("# analytic white-noise snr_sq %.12e\n" % white_noise_snr_sq(enc, white))
        _emit(buf.getvalue(), args.out)
        return EXIT_OK
    cases = [parse_case(c, args.gauge) for c in args.case] if args.case else list(ALL_CASES)
    for case in cases:
        params = cfgmod.detector_params(conf, case)
        cavity = cfgmod.cavity_params(conf, case, params)
        thermal = cfgmod.thermal_model(conf)
        enc = cfgmod.encounter(conf, m=params.m)
        engine = args.engine or ("closed-form" if cavity.Delta == 0 else "numeric")
        feats = noise_features(case, params, cavity)
        lo = nu_min if nu_min is not None else min(TWO_PI * 0.1, 1e-3 * feats.min())
        hi = nu_max if nu_max is not None else 40.0 * enc.v / enc.b
        if args.cross_check and cavity.Delta == 0:
            _snr_cross_check(case, params, cavity, thermal, lo, hi, args.tolerance)
        res = case_snr(case, params, cavity, enc, thermal, form=form, nu_min=lo, nu_max=hi,
                       rtol=rtol, engine=engine).result
        buf.write("%s,%.12e,%.12e,%.12e,%.12e\n"
                  % (case.name, res.snr_sq, res.nu_min / TWO_PI, res.nu_max / TWO_PI,
                     res.quadrature_error))
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def _snr_cross_check(case, params, cavity, thermal, lo, hi, tol):
    nu = np.logspace(np.log10(lo), np.log10(hi), 200)
    a = noise_breakdown(case, params, cavity, thermal, nu, engine="numeric")
    b = noise_breakdown(case, params, cavity, thermal, nu, engine="closed-form")
    ok = ~(a.flags | b.flags)
    d = np.where(ok, _max_rel_diff(a.total, b.total), 0.0)
    i = int(np.argmax(d))
    if d[i] > tol:
        raise MismatchError(f"{case.name}: numeric and closed-form PSDs disagree by "
                            f"{d[i]:.3e} at {nu[i] / TWO_PI:.6e} Hz")


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def cmd_sweep(args) -> int:
    from .scaling import radius_sweep

    conf = cfgmod.load_config(args.params) if args.params else cfgmod.parse_config("")
    sc = cfgmod.scaling_config(conf)
    r_min = args.r_min if args.r_min is not None else conf.get("sweep", "R_min", 1e-3)
    r_max = args.r_max if args.r_max is not None else conf.get("sweep", "R_max", 1.0)
    n = args.points if args.points is not None else conf.get("sweep", "points", 30)
    if n < 1:
        raise UsageError("empty radius grid (points must be >= 1)")
    if not (0 < r_min <= r_max):
        raise UsageError("radius grid needs 0 < R_min <= R_max")
    if n > 1 and r_min == r_max:
        raise UsageError("radius grid needs R_min < R_max for more than one point")
    R = np.logspace(np.log10(r_min), np.log10(r_max), n) if n > 1 else np.array([r_min])
    table = radius_sweep(R, sc)
    _emit(table.to_csv(), args.out)
    if args.svg:
        from .plotting import plot_sweep

        plot_sweep(table, args.svg)
    if table.success_fraction() < 0.9:
        log.error("only %.0f%% of sweep points succeeded", 100 * table.success_fraction())
        return EXIT_NUMERIC
    return EXIT_OK


# ---------------------------------------------------------------------------
# equilibrium / matrix dumps
# ---------------------------------------------------------------------------

def cmd_equilibrium(args) -> int:
    conf = cfgmod.load_config(args.params)
    p = cfgmod.electromech_full_params(conf)
    eq = find_equilibrium(p)
    T_x = transducer_constant_x(p, eq)
    from .params import reduce_electromech

    red = reduce_electromech(p, eq)
    rows = [("Q_0", eq.Q_0), ("x_0", eq.x_0), ("V_min", eq.V_min),
            ("H_QQ", eq.hessian[0, 0]), ("H_Qx", eq.hessian[0, 1]), ("H_xx", eq.hessian[1, 1]),
            ("T_x", T_x), ("C_x0", red.C_x0), ("C_eff", red.C_eff), ("k_eff", red.k_eff),
            ("grad_norm", eq.grad_norm), ("V_pull_in", p.pull_in_voltage)]
    text = "quantity,value\n" + "".join("%s,%.12e\n" % r for r in rows)
    _emit(text, args.out)
    return EXIT_OK


def cmd_matrix(args) -> int:
    case = parse_case(args.case, args.gauge)
    conf = cfgmod.load_config(args.params)
    params = cfgmod.detector_params(conf, case)
    cavity = cfgmod.cavity_params(conf, case, params)
    mat = build_system_matrix(case, params, cavity)
    _emit(mat.to_csv(), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="forcenoise",
                                 description="Quantum force-noise spectra and impulse SNR "
                                             "for electrically read-out mechanical sensors.")
    ap.add_argument("-v", "--verbose", action="store_true", help="print diagnostics")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, case=True):
        if case:
            p.add_argument("--case", required=True,
                           help="mm-voltage | mm-current | em-voltage | em-current")
        p.add_argument("--gauge", type=int, choices=(1, 2), default=1,
                       help="circuit gauge for the magnetomechanical detector")
        p.add_argument("--params", required=True, help="parameter file")
        p.add_argument("--out", default="-", help="output CSV (default: stdout)")

    p = sub.add_parser("psd", help="force-noise spectrum on a frequency grid")
    common(p)
    p.add_argument("--grid", default="1:1e10:2000:log", help="MIN_HZ:MAX_HZ:POINTS[:log|lin]")
    p.add_argument("--engine", choices=ENGINES, default="numeric")
    p.add_argument("--no-cross-check", dest="cross_check", action="store_false")
    p.add_argument("--tolerance", type=float, default=1e-6,
                   help="relative tolerance of the engine cross-check")
    p.add_argument("--svg", help="also write an SVG plot")
    p.set_defaults(func=cmd_psd)

    p = sub.add_parser("snr", help="matched-filter SNR^2 of the impulse signal")
    p.add_argument("--case", action="append", help="restrict to a case (repeatable)")
    p.add_argument("--gauge", type=int, choices=(1, 2), default=1)
    p.add_argument("--params", required=True)
    p.add_argument("--out", default="-")
    p.add_argument("--form", choices=("approx", "exact"))
    p.add_argument("--engine", choices=("numeric", "closed-form"))
    p.add_argument("--white-noise", type=float, metavar="S0",
                   help="replace the detector PSD by white noise S0 (N^2/Hz)")
    p.add_argument("--no-cross-check", dest="cross_check", action="store_false")
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.set_defaults(func=cmd_snr)

    p = sub.add_parser("sweep", help="SNR^2 against sensor radius")
    p.add_argument("--params", help="parameter file ([sweep]/[signal] sections)")
    p.add_argument("--r-min", type=float)
    p.add_argument("--r-max", type=float)
    p.add_argument("--points", type=int)
    p.add_argument("--out", default="-")
    p.add_argument("--svg")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("equilibrium", help="operating point of the biased plate detector")
    p.add_argument("--params", required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_equilibrium)

    p = sub.add_parser("matrix", help="dump the drift matrix of a case")
    common(p)
    p.set_defaults(func=cmd_matrix)
    return ap


def main(argv: Optional[list] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors exit with 2; remap to 1
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"forcenoise: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MismatchError as exc:
        print(f"forcenoise: oracle mismatch: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except ParameterError as exc:
        print(f"forcenoise: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ForceNoiseError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"forcenoise: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
