"""Experiment configuration: JSON schema, validation, dotted overrides."""

from __future__ import annotations

import copy
import json
from typing import Any, Dict, List, Optional

import numpy as np

from .dual import AmbiguitySpec
from .errors import ConfigError
from .fields import CompactWindow, Grid
from .models import Action, BROWNIAN, ReferenceModel
from .operators import OperatorConfig
from .pde import PdeScheme

DEFAULT_CONFIG: Dict[str, Any] = {
    "model": {
        "family": BROWNIAN,
        "actions": [{"label": "a0", "drift": [0.0], "sigma": [[1.0]]}],
    },
    "ambiguity": {"m": 0.5, "p": 2.0},
    "grid": {
        "dim": 1,
        "lo": [-8.0],
        "hi": [8.0],
        "n": [513],
        "window": {"lo": [-4.0], "hi": [4.0]},
    },
    "numerics": {
        "quad_order": 16,
        "dual_tol": 1e-12,
        "reach_factor": 4.0,
        "cand_per_side": 16,
        "stop_tol": 1e-3,
        "max_level": 8,
        "cfl_safety": 0.8,
    },
    "experiment": {"name": "", "parameters": {}},
    "output": {"directory": "out", "formats": ["json", "csv"]},
}

_ACTION_KEYS = {"label", "drift", "sigma", "theta", "kappa"}


def _check_keys(section: dict, allowed, path: str) -> None:
    for key in section:
        if key not in allowed:
            raise ConfigError(f"unknown configuration key {path}.{key}")


def validate_config(cfg: dict) -> None:
    _check_keys(cfg, DEFAULT_CONFIG.keys(), "config")
    _check_keys(cfg.get("model", {}), {"family", "actions"}, "model")
    _check_keys(cfg.get("ambiguity", {}), {"m", "p"}, "ambiguity")
    _check_keys(cfg.get("grid", {}), {"dim", "lo", "hi", "n", "window"}, "grid")
    _check_keys(cfg.get("grid", {}).get("window", {}), {"lo", "hi"}, "grid.window")
    _check_keys(cfg.get("numerics", {}), DEFAULT_CONFIG["numerics"].keys(), "numerics")
    _check_keys(cfg.get("experiment", {}), {"name", "parameters"}, "experiment")
    _check_keys(cfg.get("output", {}), {"directory", "formats"}, "output")
    for i, act in enumerate(cfg.get("model", {}).get("actions", [])):
        _check_keys(act, _ACTION_KEYS, f"model.actions[{i}]")
    amb = cfg.get("ambiguity", {})
    if amb.get("m", 0.0) < 0:
        raise ConfigError("ambiguity.m must be nonnegative")
    if not amb.get("p", 2.0) > 1:
        raise ConfigError("ambiguity.p must exceed 1")


def merge_defaults(cfg: dict) -> dict:
    """Fill missing sections/keys from the defaults (shallow per section)."""
    out = copy.deepcopy(DEFAULT_CONFIG)
    for section, value in cfg.items():
        if isinstance(value, dict) and isinstance(out.get(section), dict):
            out[section].update(copy.deepcopy(value))
        else:
            out[section] = copy.deepcopy(value)
    # a user-provided action list replaces the default entirely
    if "model" in cfg and "actions" in cfg["model"]:
        out["model"]["actions"] = copy.deepcopy(cfg["model"]["actions"])
    return out


def load_config(path: Optional[str], overrides: Optional[List[str]] = None) -> dict:
    if path is None:
        cfg = copy.deepcopy(DEFAULT_CONFIG)
    else:
        try:
            with open(path) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        cfg = merge_defaults(cfg)
    for item in overrides or []:
        _apply_override(cfg, item)
    validate_config(cfg)
    return cfg


def _apply_override(cfg: dict, item: str) -> None:
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key.path=value")
    key, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = cfg
    parts = key.split(".")
    for part in parts[:-1]:
        if part not in node or not isinstance(node[part], dict):
            node[part] = {}
        node = node[part]
    node[parts[-1]] = value


def build_model(cfg: dict) -> ReferenceModel:
    section = cfg["model"]
    family = section["family"]
    grid_dim = int(cfg["grid"]["dim"])
    actions = []
    for spec in section["actions"]:
        actions.append(
            Action(
                label=str(spec.get("label", f"a{len(actions)}")),
                drift=np.asarray(spec["drift"], float) if "drift" in spec else None,
                sigma=np.asarray(spec["sigma"], float) if "sigma" in spec else None,
                theta=np.asarray(spec["theta"], float) if "theta" in spec else None,
                kappa=np.asarray(spec["kappa"], float) if "kappa" in spec else None,
            )
        )
    return ReferenceModel(family, actions, dim=grid_dim)


def build_grid(cfg: dict) -> Grid:
    g = cfg["grid"]
    return Grid(tuple(g["lo"]), tuple(g["hi"]), tuple(g["n"]))


def build_window(cfg: dict) -> CompactWindow:
    w = cfg["grid"]["window"]
    return CompactWindow(tuple(w["lo"]), tuple(w["hi"]))


def build_operator_config(cfg: dict) -> OperatorConfig:
    num = cfg["numerics"]
    return OperatorConfig(
        model=build_model(cfg),
        ambiguity=AmbiguitySpec(m=float(cfg["ambiguity"]["m"]), p=float(cfg["ambiguity"]["p"])),
        grid=build_grid(cfg),
        quad_order=int(num["quad_order"]),
        dual_tol=float(num["dual_tol"]),
        reach_factor=float(num["reach_factor"]),
        cand_per_side=int(num["cand_per_side"]),
    )


def build_scheme(cfg: dict) -> PdeScheme:
    return PdeScheme(cfl_safety=float(cfg["numerics"]["cfl_safety"]))
