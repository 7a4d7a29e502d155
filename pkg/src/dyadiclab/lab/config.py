"""Experiment configuration: defaults, file loading and overrides.

A config is a nested mapping with fixed key paths. Every key has a default
in ``DEFAULTS``; files and ``--set`` overrides may only touch known keys.
The resolved config (defaults applied) is what experiments receive and
what every report embeds.
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path

import yaml

KINDS = ("simulate", "region-verify", "epsilon-search", "stationary", "nu-sweep",
         "blowup-scan", "claims-check")

DEFAULTS = {
    "kind": "simulate",
    "seed": 0,
    "workers": 1,
    "horizon": 1.0,
    "samples": 101,
    "model": {
        "beta": 2.5,
        "nu": 0.01,
        "epsilon": 0.0,
        "n_shells": 16,
        "truncation": "ZeroPad",
        "formulation": "X",
    },
    "step": {
        "rel_tol": 1e-10,
        "abs_tol": 1e-12,
        "max_step": None,
        "min_step": 1e-20,
        "safety": 0.9,
        "initial_step": None,
        "method": "auto",
    },
    "region": {"delta": 0.1, "theta": 0.6, "m": 0.75},
    # type: power_law (x_n = 2^{-g n}), explicit (values, zero-padded) or
    # in_region (random pairs inside the region, drawn in Y coordinates)
    "initial": {"type": "power_law", "g": 1.0, "values": [], "margin": 0.02},
    "output": {"dir": "out", "wide_csv": False, "plot_data": []},
    "tolerances": {
        "energy": 1e-8,
        "invariance": 1e-9,
    },
    "region_verify": {
        "grid_n": 100001,
        "resolution": 2001,
        "n_beta": 64,
        "beta_lo": 2.001,
        "beta_hi": 2.5,
        "eps": None,  # None: half of the eps found by the search
        "flux_tol": 1e-12,
    },
    "epsilon_search": {
        "beta_lo": 2.001,
        "beta_hi": 2.5,
        "grid_n": 20001,
        "n_eps": 161,
        "eps_lo": 1e-6,
        "eps_hi": 0.5,
        "eps_min": 1e-3,
    },
    "stationary": {
        "n_max": 200,
        "tol": 1e-12,
        "residual_max": 1e-10,
        "closure_samples": 10000,
    },
    "nu_sweep": {
        "k_max": 10,
        "include_inviscid": True,
        "n_compare": 10,
        "gamma": 0.6,
        "n_times": 201,
        "last_gap_max": 1e-3,
        "c0_variation_max": 0.1,
    },
    "blowup": {
        "betas": [3.5],
        "s_factor": 1.0 / 3.0,  # norm exponent s = s_factor * beta
        "growth": 1e3,
        "expect_blowup_above": 3.0,
    },
    "claims": {
        "eps": None,  # None: half of the eps found by the search
        "delta": 0.1,
        "ratio_slack": 1.01,
        "loose_rel_tol": 1e-8,
        "tight_rel_tol": 1e-11,
        "gap_shells": 15,
        "gap_max": 1e-10,
    },
}


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the key path."""

    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


def _type_ok(default, value) -> bool:
    if default is None:
        return value is None or isinstance(value, (int, float)) and not isinstance(value, bool)
    if isinstance(default, bool):
        return isinstance(value, bool)
    if isinstance(default, int):
        return isinstance(value, int) and not isinstance(value, bool)
    if isinstance(default, float):
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if isinstance(default, str):
        return isinstance(value, str)
    if isinstance(default, list):
        return isinstance(value, list)
    return False


def _merge(base: dict, over: dict, prefix: str = "") -> None:
    if not isinstance(over, dict):
        raise ConfigError(prefix or "<root>", "expected a mapping")
    for key, value in over.items():
        path = f"{prefix}.{key}" if prefix else str(key)
        if key not in base:
            raise ConfigError(path, "unknown key")
        if isinstance(base[key], dict):
            _merge(base[key], value, path)
            continue
        if not _type_ok(DEFAULTS_FLAT[path], value):
            raise ConfigError(path, f"bad type {type(value).__name__}")
        if isinstance(DEFAULTS_FLAT[path], float) and isinstance(value, int):
            value = float(value)
        base[key] = value


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        path = f"{prefix}.{k}" if prefix else k
        if isinstance(v, dict):
            out.update(_flatten(v, path))
        else:
            out[path] = v
    return out


DEFAULTS_FLAT = _flatten(DEFAULTS)


def _validate(cfg: dict) -> None:
    if cfg["kind"] not in KINDS:
        raise ConfigError("kind", f"must be one of {', '.join(KINDS)}")
    m = cfg["model"]
    if m["truncation"] not in ("ZeroPad", "MirrorLast"):
        raise ConfigError("model.truncation", "must be ZeroPad or MirrorLast")
    if m["formulation"] not in ("X", "Y"):
        raise ConfigError("model.formulation", "must be X or Y")
    if not m["n_shells"] >= 1:
        raise ConfigError("model.n_shells", "must be >= 1")
    if m["nu"] < 0:
        raise ConfigError("model.nu", "must be >= 0")
    if not m["beta"] > 0:
        raise ConfigError("model.beta", "must be > 0")
    if not (math.isfinite(cfg["horizon"]) and cfg["horizon"] > 0):
        raise ConfigError("horizon", "must be a positive number")
    if cfg["samples"] < 2:
        raise ConfigError("samples", "must be >= 2")
    if cfg["workers"] < 1:
        raise ConfigError("workers", "must be >= 1")
    if cfg["seed"] < 0:
        raise ConfigError("seed", "must be >= 0")
    if cfg["step"]["method"] not in ("auto", "etd45", "rodas4"):
        raise ConfigError("step.method", "must be auto, etd45 or rodas4")
    ini = cfg["initial"]
    if ini["type"] not in ("power_law", "explicit", "in_region"):
        raise ConfigError("initial.type", "must be power_law, explicit or in_region")
    if ini["type"] == "explicit":
        vals = ini["values"]
        if not vals or len(vals) > m["n_shells"]:
            raise ConfigError("initial.values", "need 1..n_shells numbers")
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals):
            raise ConfigError("initial.values", "must be numbers")
    for name in cfg["output"]["plot_data"]:
        if name not in PLOT_SERIES:
            raise ConfigError("output.plot_data", f"unknown series {name!r}")
    if not all(isinstance(b, (int, float)) for b in cfg["blowup"]["betas"]):
        raise ConfigError("blowup.betas", "must be numbers")


PLOT_SERIES = ("psi1", "psi2", "timeseries", "norms")


@dataclass(frozen=True)
class ExperimentConfig:
    """A resolved, validated configuration."""

    data: dict

    def __getitem__(self, key):
        return self.data[key]

    def get(self, path: str):
        cur = self.data
        for part in path.split("."):
            cur = cur[part]
        return cur

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)


def parse_override(text: str):
    """``key.path=value`` with the value read as YAML (numbers, lists, null)."""
    if "=" not in text:
        raise ConfigError(text, "override must look like key.path=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    if key not in DEFAULTS_FLAT:
        raise ConfigError(key, "unknown key")
    try:
        value = yaml.safe_load(raw) if raw.strip() else ""
    except yaml.YAMLError as exc:
        raise ConfigError(key, f"cannot parse value {raw!r}: {exc}") from None
    return key, value


def _nest(path: str, value) -> dict:
    out = value
    for part in reversed(path.split(".")):
        out = {part: out}
    return out


def load_file(path) -> dict:
    p = Path(path)
    text = p.read_text()
    try:
        data = json.loads(text) if p.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(str(p), f"cannot parse: {exc}") from None
    return data or {}


def resolve(sources=(), overrides=()) -> ExperimentConfig:
    """Apply mappings in ``sources`` then ``key=value`` overrides on top of
    the defaults, and validate."""
    cfg = copy.deepcopy(DEFAULTS)
    for src in sources:
        _merge(cfg, src)
    for item in overrides:
        key, value = parse_override(item) if isinstance(item, str) else item
        _merge(cfg, _nest(key, value))
    _validate(cfg)
    return ExperimentConfig(cfg)
