"""Experiment configuration: INI file + command-line overrides, validated up front."""
from __future__ import annotations

import configparser
import math
from fractions import Fraction
from pathlib import Path

from .dynamics import DRIFT_VARIANTS, TRUNCATION_MIN, FourierDatum
from .errors import ConfigInvalid, RadiusTooLarge
from .kernel import WeightKernel, radius_for


def parse_number(text) -> float:
    """Float or fraction such as ``1/64``."""
    try:
        return float(Fraction(str(text).strip()))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigInvalid(f"not a number: {text!r}") from exc


def parse_list(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [parse_number(p) for p in str(text).split(",") if p.strip()]


def _int(text) -> int:
    v = parse_number(text)
    if v != int(v):
        raise ConfigInvalid(f"not an integer: {text!r}")
    return int(v)


# key -> (INI section, parser)
SCHEMA = {
    "n": ("grid", _int),
    "zeta": ("grid", parse_number),
    "zetas": ("grid", parse_list),
    "kernel": ("grid", str),
    "hs": ("grid", parse_list),
    "h_ref": ("grid", parse_number),
    "gamma": ("physics", parse_number),
    "sigma": ("physics", parse_number),
    "Z": ("physics", parse_number),
    "drift": ("physics", str),
    "T": ("time", parse_number),
    "dt": ("time", parse_number),
    "t0": ("time", parse_number),
    "record_every": ("time", _int),
    "integrator": ("time", str),
    "seed": ("noise", _int),
    "master_n": ("noise", _int),
    "dt_master": ("noise", parse_number),
    "u0": ("study", str),
    "p": ("study", parse_number),
    "replicas": ("study", _int),
    "rho": ("study", parse_number),
    "q": ("study", parse_number),
    "target": ("study", str),
}


def read_file(path: str | Path) -> dict:
    """Raw values from an INI file.  Sections are only documentation; keys must be known."""
    cp = configparser.ConfigParser()
    cp.optionxform = str  # keep "Z" and "T" upper case
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
    out = {}
    for section in cp.sections():
        for key, value in cp.items(section):
            if key not in SCHEMA:
                raise ConfigInvalid(f"unknown key {key!r} in [{section}]")
            if SCHEMA[key][0] != section:
                raise ConfigInvalid(f"key {key!r} belongs in [{SCHEMA[key][0]}], found in [{section}]")
            out[key] = value
    return out


def resolve(defaults: dict, file_values: dict | None = None, overrides: dict | None = None) -> dict:
    """defaults < file < flags; every value parsed and then validated."""
    merged = dict(defaults)
    for src in (file_values or {}, overrides or {}):
        merged.update({k: v for k, v in src.items() if v is not None})
    cfg = {}
    for key, value in merged.items():
        if key not in SCHEMA:
            raise ConfigInvalid(f"unknown key {key!r}")
        parser = SCHEMA[key][1]
        try:
            cfg[key] = parser(value) if isinstance(value, str) or parser is parse_list else value
        except ValueError as exc:
            raise ConfigInvalid(f"{key}: {exc}") from exc
    validate(cfg)
    return cfg


def _grid_ok(N: int, zeta: float, what: str) -> None:
    if N < 4:
        raise ConfigInvalid(f"{what}: N={N} must be >= 4")
    try:
        radius_for(1.0 / N, zeta)
    except RadiusTooLarge as exc:
        raise ConfigInvalid(f"{what}: {exc}") from exc


def _as_N(h: float, what: str) -> int:
    if not h > 0:
        raise ConfigInvalid(f"{what}: h must be positive")
    N = round(1.0 / h)
    if abs(N * h - 1.0) > 1e-9:
        raise ConfigInvalid(f"{what}: h={h} is not 1/N for an integer N")
    return N


def validate(cfg: dict) -> None:
    zetas = list(cfg.get("zetas", []))
    if "zeta" in cfg:
        zetas.append(cfg["zeta"])
    for z in zetas:
        if not 0 < z < 0.5:
            raise ConfigInvalid(f"zeta={z} outside (0, 1/2)")
    Ns = []
    if "n" in cfg:
        Ns.append(cfg["n"])
    for h in cfg.get("hs", []):
        Ns.append(_as_N(h, "hs"))
    if "h_ref" in cfg:
        Ns.append(_as_N(cfg["h_ref"], "h_ref"))
    for N in Ns:
        for z in zetas:
            _grid_ok(N, z, f"grid N={N}, zeta={z}")
    hs = cfg.get("hs", [])
    if any(b >= a for a, b in zip(hs, hs[1:])):
        raise ConfigInvalid("hs must be strictly decreasing")
    for key in ("dt", "T", "t0", "dt_master", "gamma", "rho"):
        if key in cfg and not cfg[key] > 0:
            raise ConfigInvalid(f"{key} must be positive")
    if "sigma" in cfg and cfg["sigma"] < 0:
        raise ConfigInvalid("sigma must be >= 0")
    if "Z" in cfg and not cfg["Z"] > TRUNCATION_MIN:
        raise ConfigInvalid(f"Z={cfg['Z']} must exceed 2/sqrt(3) = {TRUNCATION_MIN:.6f}")
    if "q" in cfg and not (cfg["q"] >= 1 or math.isinf(cfg["q"])):
        raise ConfigInvalid("q must be >= 1")
    for key in ("replicas", "record_every"):
        if key in cfg and cfg[key] < 1:
            raise ConfigInvalid(f"{key} must be >= 1")
    if "p" in cfg and not cfg["p"] >= 1:
        raise ConfigInvalid("p must be >= 1")
    if "master_n" in cfg and (cfg["master_n"] < 1 or cfg["master_n"] & (cfg["master_n"] - 1)):
        raise ConfigInvalid("master_n must be a power of two")
    if "drift" in cfg and cfg["drift"] not in DRIFT_VARIANTS:
        raise ConfigInvalid(f"drift must be one of {DRIFT_VARIANTS}")
    if "integrator" in cfg and cfg["integrator"] not in ("semi-implicit", "explicit"):
        raise ConfigInvalid("integrator must be 'semi-implicit' or 'explicit'")
    for key in ("u0", "target"):
        if key in cfg:
            try:
                FourierDatum.parse(cfg[key])
            except ValueError as exc:
                raise ConfigInvalid(f"{key}: {exc}") from exc
    if "kernel" in cfg:
        try:
            kernel_from(cfg["kernel"])
        except (ValueError, OSError) as exc:
            raise ConfigInvalid(f"kernel: {exc}") from exc


def kernel_from(spec: str) -> WeightKernel:
    """``indicator``, ``exponential`` or ``file:PATH`` (two-column table)."""
    if spec.startswith("file:"):
        return WeightKernel.from_file(spec[5:])
    return WeightKernel.named(spec)
