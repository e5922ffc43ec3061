"""Run configuration: TOML files, defaults, validation, dotted overrides.

A configuration is a nested dict with the blocks below. Unknown keys are
rejected with the dotted path of the offending key, so typos fail before
any run starts. Command-line overrides use ``block.key=value`` with the
value parsed by the TOML grammar (so ``physics.eps=[0.2,0.1,0.05]`` works).
"""

from __future__ import annotations

import copy

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .errors import ConfigError

DEFAULTS = {
    "seed": 1234,
    "grid": {
        "nx": 64,
        "ny": 64,
        "nz": 16,
        "dealias": 2.0 / 3.0,
    },
    "physics": {
        # scalar for a single run, strictly decreasing list for sweeps
        "eps": [0.2, 0.1, 0.05],
        "nu": 0.1,
        "gamma": 2.0,
        "rotation": "smooth",  # "constant" | "smooth"
        "rotation_value": 1.0,  # used by the constant profile
    },
    "scheme": {
        "integrator": "imex",  # "imex" | "rk4"
        "dt": 0.01,
        "t_final": 1.0,
        "theta": 0.55,
        "rho_min": 0.1,
    },
    "experiment": {
        "output_dir": "runs",
        "filter_level": 3,
        # moving-mean window in samples; 0 picks a heuristic of ten fast-wave
        # periods (about 10 * 2 pi * eps / dt samples, clipped to the run)
        "window": 0,
        "sample_every": 1,
        "datum": "ill_prepared",  # "ill_prepared" | "rest" | "single_mode"
        "mode": [1, 0],
        "amplitude": 0.01,
    },
    "qg": {
        "axis": "variable",  # "constant" | "variable"
    },
}

_CHOICES = {
    "physics.rotation": ("constant", "smooth"),
    "scheme.integrator": ("imex", "rk4"),
    "experiment.datum": ("ill_prepared", "rest", "single_mode"),
    "qg.axis": ("constant", "variable"),
}


def default_config():
    return copy.deepcopy(DEFAULTS)


def _merge(dst, src, prefix=""):
    for key, val in src.items():
        loc = f"{prefix}{key}"
        if key not in dst:
            raise ConfigError(f"unknown configuration key {loc!r}", loc)
        cur = dst[key]
        if isinstance(cur, dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{loc!r} must be a table", loc)
            _merge(cur, val, loc + ".")
        else:
            dst[key] = val


def _check_number(cfg, loc, lo=None, hi=None, strict_lo=False, integer=False):
    head, _, key = loc.rpartition(".")
    val = cfg[head][key] if head else cfg[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{loc!r} must be a number, got {val!r}", loc)
    if integer and not isinstance(val, int):
        raise ConfigError(f"{loc!r} must be an integer, got {val!r}", loc)
    if lo is not None and (val <= lo if strict_lo else val < lo):
        raise ConfigError(f"{loc!r} out of range: {val}", loc)
    if hi is not None and val > hi:
        raise ConfigError(f"{loc!r} out of range: {val}", loc)
    return val


def validate(cfg):
    """Full validation; returns the config for chaining."""
    for loc, choices in _CHOICES.items():
        head, _, key = loc.partition(".")
        val = cfg[head][key]
        if val not in choices:
            raise ConfigError(f"{loc!r} must be one of {choices}, got {val!r}", loc)

    for axis in ("nx", "ny", "nz"):
        _check_number(cfg, f"grid.{axis}", lo=1, integer=True)
    _check_number(cfg, "grid.dealias", lo=0.0, hi=1.0, strict_lo=True)
    _check_number(cfg, "seed", lo=0, integer=True)

    eps = cfg["physics"]["eps"]
    eps_list = eps if isinstance(eps, list) else [eps]
    if not eps_list:
        raise ConfigError("'physics.eps' must not be empty", "physics.eps")
    for e in eps_list:
        if isinstance(e, bool) or not isinstance(e, (int, float)) or not 0.0 < e <= 1.0:
            raise ConfigError(f"'physics.eps' entries must lie in (0, 1], got {e!r}",
                              "physics.eps")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ConfigError("'physics.eps' must be strictly decreasing", "physics.eps")

    _check_number(cfg, "physics.nu", lo=0.0)
    _check_number(cfg, "physics.gamma", lo=1.0, hi=2.0, strict_lo=True)
    _check_number(cfg, "physics.rotation_value")
    if cfg["physics"]["rotation"] == "constant" and cfg["physics"]["rotation_value"] == 0:
        raise ConfigError("'physics.rotation_value' must not vanish",
                          "physics.rotation_value")

    _check_number(cfg, "scheme.dt", lo=0.0, strict_lo=True)
    _check_number(cfg, "scheme.t_final", lo=0.0, strict_lo=True)
    _check_number(cfg, "scheme.theta", lo=0.0, hi=1.0)
    _check_number(cfg, "scheme.rho_min", lo=0.0)

    _check_number(cfg, "experiment.filter_level", lo=0, integer=True)
    _check_number(cfg, "experiment.window", lo=0, integer=True)
    _check_number(cfg, "experiment.sample_every", lo=1, integer=True)
    _check_number(cfg, "experiment.amplitude", lo=0.0)
    mode = cfg["experiment"]["mode"]
    if (not isinstance(mode, list) or len(mode) != 2
            or not all(isinstance(m, int) and not isinstance(m, bool) for m in mode)):
        raise ConfigError(f"'experiment.mode' must be two integers, got {mode!r}",
                          "experiment.mode")
    if not isinstance(cfg["experiment"]["output_dir"], str):
        raise ConfigError("'experiment.output_dir' must be a string",
                          "experiment.output_dir")
    return cfg


def apply_overrides(cfg, overrides):
    """Apply ``dotted.key=value`` strings; values parsed as TOML scalars."""
    for item in overrides:
        key, sep, raw = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"override {item!r} is not of the form key=value", key)
        try:
            val = tomllib.loads(f"v = {raw.strip()}")["v"]
        except tomllib.TOMLDecodeError:
            # bare words read as strings, letting --set physics.rotation=smooth work
            val = raw.strip()
        node = {}
        tip = node
        parts = key.split(".")
        for p in parts[:-1]:
            tip[p] = {}
            tip = tip[p]
        tip[parts[-1]] = val
        _merge(cfg, node)
    return cfg


def load_config(path=None, overrides=()):
    """Read a TOML file over the defaults, apply overrides, validate."""
    cfg = default_config()
    if path is not None:
        try:
            with open(path, "rb") as fh:
                doc = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}", str(path))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid TOML: {exc}", str(path))
        _merge(cfg, doc)
    apply_overrides(cfg, overrides or ())
    return validate(cfg)


def eps_values(cfg):
    eps = cfg["physics"]["eps"]
    return list(eps) if isinstance(eps, list) else [eps]
