"""Plain-text parameter files.

Format::

    # comment
    [mechanics]
    m = 1e-3          # kg
    f_m_hz = 10       # mechanical resonance; alternative to k

Sections are ``[mechanics]``, ``[circuit]``, ``[cavity]``, ``[signal]`` and
``[sweep]``.  Values are SI; quantities whose key ends in ``_hz`` are
ordinary frequencies and are converted to angular frequency exactly once,
here.  Unknown sections or keys, duplicates and malformed values are
errors reported with 1-based line and column.

``configparser`` is not used because it cannot point at the offending key
of an otherwise well-formed file, and its interpolation/default-section
semantics are not wanted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .constants import TWO_PI
from .errors import ConfigError, ParameterError
from .noise import ThermalModel, sql_cavity
from .params import (
    EM_VOLTAGE,
    CavityParams,
    DetectorCase,
    ElectroMechParams,
    MagnetoMechParams,
    ReducedElectroMechParams,
    reduce_electromech,
)
from .scaling import ScalingConfig
from .signal import DmEncounter

FLOAT, STR, INT = "float", "str", "int"

SCHEMA = {
    "mechanics": {
        "m": FLOAT, "k": FLOAT, "f_m_hz": FLOAT, "T_v": FLOAT,
        "T_x": FLOAT, "A": FLOAT, "d_0": FLOAT, "V_DC": FLOAT, "N_BM": FLOAT,
    },
    "circuit": {
        "L": FLOAT, "C_L": FLOAT, "f_c_hz": FLOAT, "L_M": FLOAT,
        "C_x0": FLOAT, "C_P": FLOAT,
    },
    "cavity": {
        "kappa_hz": FLOAT, "delta_hz": FLOAT, "coupling": STR, "nu_star_hz": FLOAT,
        "G_over_2pi": FLOAT, "G_x_over_2pi": FLOAT, "G_x": STR,
    },
    "signal": {
        "m_dm": FLOAT, "b": FLOAT, "v": FLOAT, "form": STR,
        "nu_min_hz": FLOAT, "nu_max_hz": FLOAT, "white_noise": FLOAT, "rtol": FLOAT,
    },
    "sweep": {
        "R_min": FLOAT, "R_max": FLOAT, "points": INT,
        "rho": FLOAT, "h_over_R": FLOAT, "n": FLOAT, "B": FLOAT,
        "Z0_v": FLOAT, "Z0_x": FLOAT, "L_over_LM": FLOAT,
        "nu_star_hz": FLOAT, "nu_star_position_hz": FLOAT, "R_base": FLOAT,
        "b_over_R": FLOAT, "kappa_hz": FLOAT, "f_m_hz": FLOAT,
        "spring": STR, "current_impedance": STR,
    },
}


@dataclass(frozen=True)
class Entry:
    value: object
    line: int
    column: int  # column of the value


@dataclass
class ConfigFile:
    """Parsed file: ``sections[name][key] -> Entry``."""

    sections: dict = field(default_factory=dict)
    path: Optional[str] = None
    section_lines: dict = field(default_factory=dict)

    def has(self, section: str) -> bool:
        return section in self.sections

    def require(self, section: str) -> dict:
        if section not in self.sections:
            raise ConfigError(f"missing required section [{section}]", path=self.path)
        return self.sections[section]

    def get(self, section: str, key: str, default=None):
        e = self.sections.get(section, {}).get(key)
        return default if e is None else e.value

    def where(self, section: str, key: str):
        e = self.sections.get(section, {}).get(key)
        return (e.line, e.column) if e else (self.section_lines.get(section), 1)

    def error(self, section, key, message):
        line, col = self.where(section, key)
        return ConfigError(message, line=line, column=col, path=self.path)


def _convert(kind, raw):
    if kind == FLOAT:
        v = float(raw)
        if not math.isfinite(v):
            raise ValueError("not finite")
        return v
    if kind == INT:
        return int(raw)
    return raw


def parse_config(text: str, path: Optional[str] = None) -> ConfigFile:
    cfg = ConfigFile(path=path)
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        stripped = line.lstrip()
        if not stripped:
            continue
        indent = len(line) - len(stripped)
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ConfigError("unterminated section header", lineno, indent + 1, path)
            name = stripped[1:-1].strip()
            if name not in SCHEMA:
                raise ConfigError(f"unknown section [{name}]", lineno, indent + 1, path)
            if name in cfg.sections:
                raise ConfigError(f"duplicate section [{name}]", lineno, indent + 1, path)
            cfg.sections[name] = {}
            cfg.section_lines[name] = lineno
            current = name
            continue
        if "=" not in stripped:
            raise ConfigError("expected 'key = value'", lineno, indent + 1, path)
        if current is None:
            raise ConfigError("key outside of any section", lineno, indent + 1, path)
        key_part, val_part = line.split("=", 1)
        key = key_part.strip()
        kcol = indent + 1
        vcol = len(key_part) + 2 + (len(val_part) - len(val_part.lstrip()))
        value = val_part.strip()
        schema = SCHEMA[current]
        if key not in schema:
            raise ConfigError(f"unknown key '{key}' in [{current}]", lineno, kcol, path)
        if key in cfg.sections[current]:
            raise ConfigError(f"duplicate key '{key}' in [{current}]", lineno, kcol, path)
        if not value:
            raise ConfigError(f"missing value for '{key}'", lineno, vcol, path)
        try:
            v = _convert(schema[key], value)
        except ValueError:
            raise ConfigError(f"'{key}' expects a {schema[key]} value, got {value!r}",
                              lineno, vcol, path) from None
        cfg.sections[current][key] = Entry(v, lineno, vcol)
    return cfg


def load_config(path: str) -> ConfigFile:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}", path=path) from None
    return parse_config(text, path=str(path))


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def _wrap(cfg: ConfigFile, section: str, fn):
    """Turn parameter validation failures into located config errors."""
    try:
        return fn()
    except ParameterError as exc:
        raise ConfigError(str(exc), line=cfg.section_lines.get(section), column=1,
                          path=cfg.path) from None


def _need(cfg: ConfigFile, section: str, key: str):
    cfg.require(section)
    v = cfg.get(section, key)
    if v is None:
        raise ConfigError(f"[{section}] is missing required key '{key}'",
                          line=cfg.section_lines.get(section), column=1, path=cfg.path)
    return v


def _spring(cfg: ConfigFile, m: float) -> float:
    k = cfg.get("mechanics", "k")
    fm = cfg.get("mechanics", "f_m_hz")
    if k is not None and fm is not None:
        raise cfg.error("mechanics", "f_m_hz", "give either k or f_m_hz, not both")
    if k is None and fm is None:
        raise ConfigError("[mechanics] needs k or f_m_hz", line=cfg.section_lines.get("mechanics"),
                          column=1, path=cfg.path)
    return k if k is not None else m * (TWO_PI * fm) ** 2


def electromech_full_params(cfg: ConfigFile) -> ElectroMechParams:
    m = _need(cfg, "mechanics", "m")
    return _wrap(cfg, "mechanics", lambda: ElectroMechParams(
        m=m, k=_spring(cfg, m), A=_need(cfg, "mechanics", "A"), d_0=_need(cfg, "mechanics", "d_0"),
        V_DC=_need(cfg, "mechanics", "V_DC"), C_P=_need(cfg, "circuit", "C_P"),
        L=_need(cfg, "circuit", "L"), L_M=cfg.get("circuit", "L_M")))


def detector_params(cfg: ConfigFile, case: DetectorCase):
    """Parameter object suitable for ``case``.

    The electromechanical detector is taken in reduced form when ``T_x`` and
    ``C_x0`` are given, otherwise it is linearised about the equilibrium of
    the biased plates (``A``, ``d_0``, ``V_DC``).
    """
    m = _need(cfg, "mechanics", "m")
    L = _need(cfg, "circuit", "L")
    L_M = cfg.get("circuit", "L_M")
    if case.is_magnetic:
        C_L = cfg.get("circuit", "C_L")
        fc = cfg.get("circuit", "f_c_hz")
        if (C_L is None) == (fc is None):
            raise ConfigError("[circuit] needs exactly one of C_L or f_c_hz",
                              line=cfg.section_lines.get("circuit"), column=1, path=cfg.path)
        if C_L is None:
            C_L = 1.0 / (L * (TWO_PI * fc) ** 2)
        return _wrap(cfg, "mechanics", lambda: MagnetoMechParams(
            m=m, k=_spring(cfg, m), T_v=_need(cfg, "mechanics", "T_v"), L=L, C_L=C_L, L_M=L_M))
    if cfg.get("mechanics", "T_x") is not None or cfg.get("circuit", "C_x0") is not None:
        return _wrap(cfg, "mechanics", lambda: ReducedElectroMechParams(
            m=m, k_eff=_spring(cfg, m), T_x=_need(cfg, "mechanics", "T_x"),
            C_x0=_need(cfg, "circuit", "C_x0"), C_P=_need(cfg, "circuit", "C_P"), L=L, L_M=L_M))
    return reduce_electromech(electromech_full_params(cfg))


def cavity_params(cfg: ConfigFile, case: DetectorCase, params) -> CavityParams:
    kappa = TWO_PI * _need(cfg, "cavity", "kappa_hz")
    Delta = TWO_PI * cfg.get("cavity", "delta_hz", 0.0)
    mode = cfg.get("cavity", "coupling", "sql")
    gx_mode = cfg.get("cavity", "G_x", "slaved")
    if gx_mode not in ("slaved", "zero", "value"):
        raise cfg.error("cavity", "G_x", "G_x must be 'slaved', 'zero' or 'value'")
    if mode == "sql":
        nu_star = TWO_PI * _need(cfg, "cavity", "nu_star_hz")
        cav = _wrap(cfg, "cavity", lambda: sql_cavity(case, params, kappa, nu_star, Delta,
                                                      include_G_x=(gx_mode == "slaved")))
        G = cav.G
    elif mode == "fixed":
        G = TWO_PI * _need(cfg, "cavity", "G_over_2pi")
    else:
        raise cfg.error("cavity", "coupling", "coupling must be 'sql' or 'fixed'")
    Gx = 0.0
    if case == EM_VOLTAGE:
        if gx_mode == "slaved":
            Gx = params.T_x * G
        elif gx_mode == "value":
            Gx = TWO_PI * _need(cfg, "cavity", "G_x_over_2pi")
    return _wrap(cfg, "cavity", lambda: CavityParams(kappa=kappa, G=G, Delta=Delta, G_x=Gx))


def thermal_model(cfg: ConfigFile) -> ThermalModel:
    return _wrap(cfg, "mechanics", lambda: ThermalModel(cfg.get("mechanics", "N_BM", 0.0)))


def encounter(cfg: ConfigFile, m: Optional[float] = None) -> DmEncounter:
    cfg.require("signal")
    m = m if m is not None else _need(cfg, "mechanics", "m")
    kw = {k: cfg.get("signal", k) for k in ("m_dm", "b", "v") if cfg.get("signal", k) is not None}
    return _wrap(cfg, "signal", lambda: DmEncounter(m=m, **kw))


def scaling_config(cfg: ConfigFile) -> ScalingConfig:
    kw = {}
    direct = ("rho", "h_over_R", "n", "B", "Z0_v", "Z0_x", "L_over_LM", "R_base", "b_over_R",
              "spring", "current_impedance")
    for k in direct:
        if cfg.get("sweep", k) is not None:
            kw[k] = cfg.get("sweep", k)
    hz = {"nu_star_hz": "nu_star_base", "nu_star_position_hz": "nu_star_position_base",
          "kappa_hz": "kappa", "f_m_hz": "omega_m_base"}
    for k, target in hz.items():
        if cfg.get("sweep", k) is not None:
            kw[target] = TWO_PI * cfg.get("sweep", k)
    for k in ("m_dm", "v"):
        if cfg.get("signal", k) is not None:
            kw[k] = cfg.get("signal", k)
    if cfg.get("signal", "rtol") is not None:
        kw["rtol"] = cfg.get("signal", "rtol")
    if cfg.get("signal", "nu_min_hz") is not None:
        kw["nu_min"] = TWO_PI * cfg.get("signal", "nu_min_hz")
    return _wrap(cfg, "sweep", lambda: ScalingConfig(**kw))
