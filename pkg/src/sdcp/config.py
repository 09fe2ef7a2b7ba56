"""Flat ``key = value`` experiment configuration files.

Blank lines and ``#`` comments are ignored.  Vectors are comma separated.
Durations accept an ``s``, ``m``, ``h`` or ``d`` suffix, or ``inf``.

Example::

    cp_shares    = 0.13, 0.75, 0.02, 0.10
    K            = 1000
    T            = 10s
    horizon      = 1h
    total_rate   = 100
    catalog_size = 100000
    alpha        = 0.8
    schedule     = conditional
"""
from __future__ import annotations

import math

from sdcp.engine import ConfigError, ExperimentConfig
from sdcp.schedules import ScheduleConfig, ScheduleKind
from sdcp.workload import OnOffModel

_UNITS = {"s": 1.0, "m": 60.0, "h": 3600.0, "d": 86400.0}

DEFAULTS = {
    "T": "10s",
    "horizon": "1h",
    "total_rate": "100",
    "catalog_size": "100000",
    "alpha": "0.8",
    "schedule": "conditional",
    "nu": "0.01",
    "bootstrap": "6m",
    "adaptive": "1h",
    "b_ratio": "0.1",
    "reinit_period": "inf",
    "churn": "off",
    "mean_on": "1d",
    "mean_off": "9d",
    "seed": "0",
    "replications": "1",
    "initial_allocation": "uniform",
}
REQUIRED = ("cp_shares", "K")
KNOWN = set(DEFAULTS) | set(REQUIRED) | {"P"}


class ConfigFileError(ConfigError):
    """Config error tied to a location in a file."""

    def __init__(self, field, message, path=None, line=None):
        super().__init__(field, message)
        self.path = path
        self.line = line

    def __str__(self):
        where = f"{self.path}:{self.line}: " if self.line else (
            f"{self.path}: " if self.path else "")
        return where + super().__str__()


def parse_duration(text):
    """Seconds in ``text`` such as ``"10"``, ``"6m"``, ``"3h"``, ``"1d"``, ``"inf"``."""
    t = str(text).strip().lower()
    if t in ("inf", "infinity", "never"):
        return math.inf
    scale = 1.0
    if t and t[-1] in _UNITS:
        scale = _UNITS[t[-1]]
        t = t[:-1]
    try:
        value = float(t) * scale
    except ValueError:
        raise ValueError(f"not a duration: {text!r}") from None
    if value < 0:
        raise ValueError(f"duration must be nonnegative: {text!r}")
    return value


def format_duration(seconds):
    if math.isinf(seconds):
        return "inf"
    for suffix in ("d", "h", "m"):
        unit = _UNITS[suffix]
        if seconds >= unit and seconds % unit == 0:
            return f"{int(seconds // unit)}{suffix}"
    return f"{seconds:g}s"


def read_pairs(path):
    """Return ``{key: (value, line_number)}``; rejects unknown and repeated keys."""
    pairs = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigFileError("syntax", f"expected key = value, got {line!r}",
                                      path, lineno)
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in KNOWN:
                raise ConfigFileError(key, "unknown key", path, lineno)
            if key in pairs:
                raise ConfigFileError(key, "given twice", path, lineno)
            pairs[key] = (value, lineno)
    return pairs


def _convert(key, value):
    if key == "cp_shares":
        return tuple(float(x) for x in value.split(","))
    if key == "initial_allocation":
        return value if value == "uniform" else tuple(
            float(x) for x in value.split(","))
    if key in ("K", "catalog_size", "seed", "replications", "P"):
        number = float(value)
        if number != int(number):
            raise ValueError(f"expected an integer, got {value!r}")
        return int(number)
    if key in ("T", "horizon", "bootstrap", "adaptive", "reinit_period",
               "mean_on", "mean_off"):
        return parse_duration(value)
    if key in ("total_rate", "alpha", "nu", "b_ratio"):
        return float(value)
    if key == "schedule":
        return ScheduleKind(value.lower())
    if key == "churn":
        if value.lower() not in ("on", "off"):
            raise ValueError("expected on or off")
        return value.lower() == "on"
    raise AssertionError(key)


def build_config(values):
    """Assemble an ``ExperimentConfig`` from converted values (all keys present)."""
    v = values
    reinit = v["reinit_period"]
    try:
        schedule = ScheduleConfig.for_slot_length(
            v["T"], kind=v["schedule"], bootstrap=v["bootstrap"],
            adaptive=v["adaptive"], nu=v["nu"], b_ratio=v["b_ratio"],
            reinit_period=None if math.isinf(reinit) else reinit)
    except ValueError as exc:
        raise ConfigError("schedule", str(exc)) from None
    churn = None
    if v["churn"]:
        try:
            churn = OnOffModel(v["mean_on"], v["mean_off"], v["total_rate"])
        except ValueError as exc:
            raise ConfigError("mean_on", str(exc)) from None
    if "P" in v and v["P"] != len(v["cp_shares"]):
        raise ConfigError("P", f"P={v['P']} but cp_shares has "
                               f"{len(v['cp_shares'])} entries")
    if not v["T"] > 0 or math.isinf(v["T"]):
        raise ConfigError("T", "slot length must be positive and finite")
    if math.isinf(v["horizon"]):
        raise ConfigError("horizon", "must be finite")
    return ExperimentConfig(
        cp_shares=v["cp_shares"], K=v["K"], T=v["T"], horizon=v["horizon"],
        total_rate=v["total_rate"], catalog_size=v["catalog_size"],
        alpha=v["alpha"], schedule=schedule, nonstationary=churn,
        seed=v["seed"], replications=v["replications"],
        initial_allocation=v["initial_allocation"])


def parse_config(path, overrides=None):
    """Parse a config file into an ``ExperimentConfig``.

    ``overrides`` maps keys to raw string values that replace the file's.
    Errors raise ``ConfigFileError`` naming the key and, when it came from
    the file, its line.
    """
    pairs = read_pairs(path)
    raw = {k: (v, None) for k, v in DEFAULTS.items()}
    raw.update(pairs)
    for key, value in (overrides or {}).items():
        raw[key] = (str(value), None)
    missing = [k for k in REQUIRED if k not in raw]
    if missing:
        raise ConfigFileError(missing[0], "required key missing", path)
    values = {}
    for key, (value, line) in raw.items():
        try:
            values[key] = _convert(key, value)
        except ValueError as exc:
            raise ConfigFileError(key, str(exc), path, line) from None
    try:
        return build_config(values)
    except ConfigError as exc:
        line = raw.get(exc.field, (None, None))[1]
        message = str(exc).split(": ", 1)[-1]
        raise ConfigFileError(exc.field, message, path, line) from None

