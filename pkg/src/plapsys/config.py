"""Run configuration: a single JSON file, deep-merged over defaults.

Runs are archival artifacts, so every report embeds the fully resolved
config (defaults included) and parsing either succeeds totally or fails
with a line-anchored message.  Unknown keys are rejected rather than
ignored; a typo that silently falls back to a default would poison the
archive.
"""

from __future__ import annotations

import copy
import json


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "domain": {
        "kind": "interval",        # interval | rectangle
        "lengths": [1.0],
        "resolution": 129,         # nodes per axis
    },
    "p": 2.0,
    "q": 2.0,
    "spec_f": {
        "m": 1.0, "M": 1.0,
        "alpha": -0.25, "beta": 0.25,
        "gamma": 0.5, "theta": 0.5,
        "a1": 0.0, "a2": 0.0,
    },
    "spec_g": {
        "m": 1.0, "M": 1.0,
        "alpha": 0.25, "beta": -0.25,
        "gamma": 0.5, "theta": 0.5,
        "a1": 0.0, "a2": 0.0,
    },
    "solver": {
        "grad_reg": 1e-8,
        "max_iter": 400,
        "tol_residual": 1e-10,
        "damping": 1.0,
    },
    "eigen": {
        "tol": 1e-10,
        "max_iter": 300,
    },
    "barrier_search": {
        "c_start": 2.0,
        "c_cap": float(2 ** 40),
        "margin_factor": 1.05,
    },
    "certification": {
        "w_samples": 3,
        "seed": 515,
    },
    "auxiliary": {
        "tol_inner": None,         # null -> picard derives from tol_outer and h
        "max_sweeps": 1000,
        "monotone_tol": 1e-10,
        "shift_safety": 1.25,
    },
    "fixedpoint": {
        "tol_outer": 1e-6,
        "max_outer": 50,
        "damping": 1.0,
        "K_p": None,               # null -> 2x empirical estimate
        "K_q": None,
        "in_k_tol": 1e-9,
    },
    "verify": {
        "tol": 1e-6,
        "rect_tol": 1e-9,
    },
    "output": {
        "report": None,
        "fields": None,
        "plot": None,
    },
}


def _merge(defaults, user, path):
    """Deep merge with unknown-key rejection; scalars replace wholesale."""
    if not isinstance(user, dict):
        raise ConfigError(f"config block '{path}' must be an object")
    out = copy.deepcopy(defaults)
    for key, val in user.items():
        if key not in defaults:
            known = ", ".join(sorted(defaults))
            raise ConfigError(
                f"unknown config key '{path + key}' (known: {known})"
            )
        if isinstance(defaults[key], dict):
            out[key] = _merge(defaults[key], val, path + key + ".")
        else:
            out[key] = val
    return out


def parse_config(text: str) -> dict:
    try:
        user = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config is not valid JSON: {exc.msg} at line {exc.lineno}, "
            f"column {exc.colno}"
        ) from None
    resolved = _merge(DEFAULTS, user, "")
    _check(resolved)
    return resolved


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def _check(cfg: dict):
    dom = cfg["domain"]
    if dom["kind"] not in ("interval", "rectangle"):
        raise ConfigError("domain.kind must be 'interval' or 'rectangle'")
    want = 1 if dom["kind"] == "interval" else 2
    lengths = dom["lengths"]
    if not (isinstance(lengths, list) and len(lengths) == want
            and all(isinstance(v, (int, float)) and v > 0 for v in lengths)):
        raise ConfigError(
            f"domain.lengths must be {want} positive number(s) for "
            f"kind '{dom['kind']}'"
        )
    if not (isinstance(dom["resolution"], int) and dom["resolution"] >= 3):
        raise ConfigError("domain.resolution must be an integer >= 3")
    for name in ("p", "q"):
        if not (isinstance(cfg[name], (int, float)) and cfg[name] > 1.0):
            raise ConfigError(f"{name} must be a number > 1")
    for blk in ("spec_f", "spec_g"):
        for key, val in cfg[blk].items():
            if not isinstance(val, (int, float)):
                raise ConfigError(f"{blk}.{key} must be a number")
    for name, lo in (("solver.tol_residual", 0.0), ("fixedpoint.tol_outer", 0.0),
                     ("verify.tol", 0.0)):
        blk, key = name.split(".")
        if not (isinstance(cfg[blk][key], (int, float)) and cfg[blk][key] > lo):
            raise ConfigError(f"{name} must be a positive number")
    ti = cfg["auxiliary"]["tol_inner"]
    if ti is not None and not (isinstance(ti, (int, float)) and ti > 0):
        raise ConfigError("auxiliary.tol_inner must be null or positive")
    for key in ("K_p", "K_q"):
        kv = cfg["fixedpoint"][key]
        if kv is not None and not (isinstance(kv, (int, float)) and kv > 0):
            raise ConfigError(f"fixedpoint.{key} must be null or positive")
    out = cfg["output"]
    for key, val in out.items():
        if val is not None and not isinstance(val, str):
            raise ConfigError(f"output.{key} must be null or a path string")
