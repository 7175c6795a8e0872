"""Run configuration: defaults, JSON loading, validation, dotted overrides.

A fully resolved configuration is written next to every output as
config.json; re-running any subcommand on that snapshot reproduces the
outputs byte for byte.
"""
from __future__ import annotations

import copy
import json
import math
from pathlib import Path

from .errors import ConfigurationError
from .forcing import ForcingSpec, forcing_from_dict, forcing_to_dict
from .integrate import history_length
from .model import ModelParams

PI = math.pi

DEFAULTS: dict = {
    "model": {"p": 0.95, "r": 0.8, "s": 0.8, "tau": 1.55, "u": 0.0},
    "integrator": {"h": 0.01},
    "forcing": {"kind": "periodic", "T": 4.1, "phi": 0.0},
    "healing": {"ell": 1, "fd_eps": 1e-6, "newton_tol": 1e-10,
                "newton_step_tol": 1e-8, "newton_max_iter": 50},
    "classify": {"horizon_periods": 200, "x_large_threshold": -1.0},
    "simulate": {"x1": -0.5, "x2": -0.5, "span": 82.0, "record_every": 1,
                 "transient": 0.0},
    "heatmap": {"u_min": 0.0, "u_max": 0.75, "du": 0.01, "x0": -0.5},
    "basin": {"rect": [-0.65, 0.05, -0.65, 0.05], "nx": 100, "ny": 100},
    "manifold": {"seed": [-0.3, -0.3], "continue_du": 0.005,
                 "directions": [-1, 1], "delta_init": 0.005,
                 "delta_min": 1e-6, "delta_max": 0.02, "alpha_max": 0.3,
                 "bisect_tol": 1e-8, "seed_offset": 1e-3, "arc_points": 64,
                 "max_points": 1000, "max_arclength": 1.6,
                 "box": [-0.85, 0.2, -0.85, 0.2]},
    "fixed_points": {"seeds": [[-0.5, -0.5], [-0.3, -0.3], [0.0, 0.0]],
                     "u_end": 0.3, "du": 0.005},
    "phase_scan": {"n_phi": 8, "phi_min": -PI, "phi_max": PI,
                   "n_tau": 8, "tau_min": 1.295, "tau_max": 1.625,
                   "du": 0.005, "u_max": 1.0},
    "bifurcation": {"mode": "1d", "tau_min": 1.30, "tau_max": 1.62,
                    "n_tau": 17, "u": 0.55, "u_min": 0.0, "u_max": 0.75,
                    "n_u": 6, "bracket_width": 1e-3, "h_fine": 1e-3,
                    "max_period": 4},
    "spectral_gap": {"rect": [-0.75, 0.15, -0.75, 0.15], "n": 3,
                     "det_n": 9, "power": 1},
    "mpt": {"t_switch_kyr_bp": 750.0, "scale_before": 0.01, "u_end": 0.15,
            "span": 200.0, "record_every": 10},
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigurationError(f"unknown configuration key: {here}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigurationError(f"{here} must be a table, got {val!r}")
            out[key] = _merge(base[key], val, here)
        else:
            out[key] = val
    return out


def _merge_forcing(base: dict, override: dict) -> dict:
    # forcing blocks are kind-dependent; validated by forcing_from_dict
    out = copy.deepcopy(base)
    out["forcing"] = copy.deepcopy(override)
    return out


def load_config(path: str | Path | None = None,
                overrides: list[str] | None = None) -> dict:
    """Merge defaults, an optional JSON file, and dotted key=value overrides."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                user = json.load(fh)
        except FileNotFoundError:
            raise ConfigurationError(f"config file not found: {path}") from None
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"config file {path} is not valid JSON: {e}") from None
        if not isinstance(user, dict):
            raise ConfigurationError(f"config root must be an object, got {type(user).__name__}")
        forcing_block = user.pop("forcing", None)
        cfg = _merge(cfg, user)
        if forcing_block is not None:
            cfg = _merge_forcing(cfg, forcing_block)
    for item in overrides or []:
        cfg = apply_override(cfg, item)
    validate_config(cfg)
    return cfg


def apply_override(cfg: dict, item: str) -> dict:
    """Apply one dotted override like model.u=0.09 (value parsed as JSON,
    falling back to a bare string)."""
    if "=" not in item:
        raise ConfigurationError(f"override must look like key=value, got {item!r}")
    key, raw = item.split("=", 1)
    parts = key.strip().split(".")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    out = copy.deepcopy(cfg)
    node = out
    for i, part in enumerate(parts[:-1]):
        if part not in node or not isinstance(node[part], dict):
            raise ConfigurationError(f"unknown configuration key: {'.'.join(parts[:i + 1])}")
        node = node[part]
    leaf = parts[-1]
    if parts[0] != "forcing" and leaf not in node:
        raise ConfigurationError(f"unknown configuration key: {key.strip()}")
    node[leaf] = value
    return out


def validate_config(cfg: dict) -> None:
    m = cfg["model"]
    h = cfg["integrator"]["h"]
    if not (isinstance(h, (int, float)) and h > 0):
        raise ConfigurationError(f"integrator.h must be positive, got {h}")
    params = model_params(cfg)
    history_length(params.tau, h)  # tau/h integrality
    spec = forcing_spec(cfg)
    from .forcing import forcing_period
    T = forcing_period(spec)
    if T is not None:
        n_per = round(T / h)
        if abs(n_per * h - T) > 1e-9:
            raise ConfigurationError(
                f"forcing period T={T} is not an integer multiple of h={h}")
    for name in ("p", "r", "s", "tau", "u"):
        v = m[name]
        if not (isinstance(v, (int, float)) and math.isfinite(v)):
            raise ConfigurationError(f"model.{name} must be a finite number, got {v!r}")


def model_params(cfg: dict) -> ModelParams:
    m = cfg["model"]
    return ModelParams(p=float(m["p"]), r=float(m["r"]), s=float(m["s"]),
                       tau=float(m["tau"]), u=float(m["u"]))


def forcing_spec(cfg: dict) -> ForcingSpec:
    return forcing_from_dict(cfg["forcing"])


def snapshot_config(cfg: dict) -> dict:
    """Resolved, self-contained copy for writing next to outputs (tabulated
    forcing data inlined so the snapshot alone reproduces the run)."""
    out = copy.deepcopy(cfg)
    out["forcing"] = forcing_to_dict(forcing_spec(cfg))
    return out
