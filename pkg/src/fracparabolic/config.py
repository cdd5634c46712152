"""TOML experiment configuration with strict validation."""

from __future__ import annotations

import copy
import json
import math
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError

MODES = ("ml", "caputo", "fode", "solve", "holder", "sweep")


def _real(lo=-math.inf, hi=math.inf, lo_open=False, hi_open=False):
    def check(v):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            return "must be a finite number"
        v = float(v)
        if v < lo or (lo_open and v == lo) or v > hi or (hi_open and v == hi):
            left = "(" if lo_open else "["
            right = ")" if hi_open else "]"
            return f"must lie in {left}{lo}, {hi}{right}"
        return None

    return check, float


def _integer(lo, hi=2**62):
    def check(v):
        if isinstance(v, bool) or not isinstance(v, int):
            return "must be an integer"
        if not lo <= v <= hi:
            return f"must lie in [{lo}, {hi}]"
        return None

    return check, int


def _choice(*options):
    def check(v):
        return None if v in options else f"must be one of {list(options)}"

    return check, str


def _real_list(lo, hi):
    def check(v):
        if not isinstance(v, list) or not v:
            return "must be a nonempty list of numbers"
        for item in v:
            if isinstance(item, bool) or not isinstance(item, (int, float)) or not lo < item <= hi:
                return f"entries must lie in ({lo}, {hi}]"
        return None

    return check, lambda v: [float(x) for x in v]


# section -> key -> ((check, cast), default)
SCHEMA = {
    "model": {
        "alpha": (_real(0.0, 1.0, lo_open=True), 0.5),
        "sigma": (_real(0.0, 1.0, lo_open=True, hi_open=True), 0.5),
        "lambda": (_real(0.0, math.inf, lo_open=True), 1.0),
        "Lambda": (_real(0.0, math.inf, lo_open=True), 1.0),
        "C1": (_real(0.0), 1.0),
        "operator": (_choice("M+", "M-"), "M+"),
        "epsilon0": (_real(0.0, math.inf, lo_open=True), 0.05),
        "nu": (_real(0.0, 1.0, hi_open=True), 0.3),
    },
    "grid": {
        "x_min": (_real(), -1.0),
        "x_max": (_real(), 1.0),
        "n_points": (_integer(3, 100_000), 129),
        "t_start": (_real(), 0.0),
        "t_end": (_real(), 0.5),
        "n_steps": (_integer(0, 10_000_000), 0),
        "c_stab": (_real(0.0, 1.0, lo_open=True), 0.9),
    },
    "data": {
        "preset": (_choice("constant", "bump", "half_negative", "planted_exponent"), "bump"),
        "value": (_real(), 1.0),
        "amplitude": (_real(), 1.0),
        "width": (_real(0.0, math.inf, lo_open=True), 0.25),
        "kappa": (_real(0.0, 1.0, lo_open=True, hi_open=True), 0.3),
        "forcing": (_real(), 0.0),
        "noise": (_real(0.0), 0.0),
    },
    "ml": {
        "t_min": (_real(), -5.0),
        "t_max": (_real(), 3.0),
        "n_points": (_integer(2, 1_000_000), 81),
    },
    "caputo": {
        "beta": (_real(0.0, 2.0, lo_open=True), 0.5),
        "t_end": (_real(0.0, math.inf, lo_open=True), 1.0),
        "n_steps": (_integer(1, 1_000_000), 256),
    },
    "fode": {
        "t_end": (_real(0.0, math.inf, lo_open=True), 1.0),
        "n_steps": (_integer(1, 100_000), 256),
        "forcing": (_real(), 1.0),
    },
    "holder": {
        "source": (_choice("solve", "planted"), "solve"),
        "x0": (_real(), 0.0),
        "t0": (_real(), math.nan),
        "r": (_real(0.0, math.inf, lo_open=True), 0.5),
        "depth": (_integer(3, 64), 4),
        "ratio": (_real(0.0, 1.0, lo_open=True, hi_open=True), 0.25),
        "time_kappa": (_real(0.0, 1.0, hi_open=True), 0.0),
    },
    "sweep": {
        "alphas": (_real_list(0.0, 1.0), [0.6, 0.8, 0.95]),
    },
}

TOP_LEVEL = {"mode": (_choice(*MODES), None), "seed": (_integer(0, 2**64 - 1), 0)}


def _validate_section(name, raw, schema):
    if not isinstance(raw, dict):
        raise ConfigError(f"[{name}] must be a table")
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(unknown)}")
    out = {}
    for key, ((check, cast), default) in schema.items():
        if key not in raw:
            out[key] = copy.deepcopy(default)
            continue
        problem = check(raw[key])
        if problem:
            raise ConfigError(f"{name}.{key} {problem}")
        out[key] = cast(raw[key])
    return out


def validate(raw):
    """Return the fully populated configuration dictionary or raise ``ConfigError``."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a table")
    unknown = sorted(set(raw) - set(SCHEMA) - set(TOP_LEVEL))
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
    cfg = {}
    for key, ((check, cast), default) in TOP_LEVEL.items():
        if key in raw:
            problem = check(raw[key])
            if problem:
                raise ConfigError(f"{key} {problem}")
            cfg[key] = cast(raw[key])
        else:
            cfg[key] = default
    for name, schema in SCHEMA.items():
        cfg[name] = _validate_section(name, raw.get(name, {}), schema)
    m, g = cfg["model"], cfg["grid"]
    if m["lambda"] > m["Lambda"]:
        raise ConfigError("model.lambda must not exceed model.Lambda")
    if g["x_max"] <= g["x_min"]:
        raise ConfigError("grid.x_max must exceed grid.x_min")
    if g["t_end"] <= g["t_start"]:
        raise ConfigError("grid.t_end must exceed grid.t_start")
    if math.isnan(cfg["holder"]["t0"]):
        cfg["holder"]["t0"] = g["t_end"]
    if cfg["ml"]["t_max"] <= cfg["ml"]["t_min"]:
        raise ConfigError("ml.t_max must exceed ml.t_min")
    if cfg["data"]["preset"] == "planted_exponent" and cfg["data"]["kappa"] >= 2.0 * m["sigma"]:
        raise ConfigError("data.kappa must stay below 2 * model.sigma")
    return cfg


def load(path):
    """Load a TOML config, or the ``config`` echo inside a run manifest (``.json``)."""
    path = str(path)
    try:
        with open(path, "rb") as fh:
            if path.endswith(".json"):
                manifest = json.load(fh)
                if not isinstance(manifest, dict) or "config" not in manifest:
                    raise ConfigError("JSON config must be a run manifest with a 'config' entry")
                raw = {k: v for k, v in manifest["config"].items() if v is not None}
            else:
                raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    return validate(raw)
