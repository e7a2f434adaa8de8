"""Run configuration: JSON schema, validation, defaults.

A config file is a JSON object; every key is optional and falls back to the
defaults below. CLI flags override file values. Schema (defaults in
parentheses):

    grid:         {L (30.0), N (3000)}
    model:        {potential: {kind ("double_gaussian_well"), depth (2.0),
                   separation (2.0), width (1.0)}, gamma (-1.0), p (2.0)}
    continuation: {ds_init (0.05), ds_min (1e-6), ds_max (1.0),
                   E_min (1e-3), E_max (200.0), norm_max (1e6),
                   max_steps (5000)}
    tolerances:   {tol_residual (1e-10), event_tol (null = 1e-8*||L||),
                   slope_tol (null = 1e-6*max(1, Q))}
    seeds:        {trivial (true), amplitude (1e-2),
                   explicit: {profile: path, E: value} (null),
                   variational: {mu: value} (null)}
    evolution:    {dt (1e-3), T (50.0), eps (1e-3), sample_every (50)}
    scan:         {mu_values ([0.05, 0.1, 0.3, 0.6, 1.2, 2.4])}
    suite:        {scaling_E ([25, 50, 100, 200]), rescale_E ([100, 200]),
                   branch (null = auto-select), probe_directions
                   (["lplus_ground", "mirror_antisymmetric"])}
    output:       {directory (null), profile_every (10)}
    budget:       16
    seed:         0
"""

import json
import math
import os
from dataclasses import asdict, dataclass, field

from .errors import ConfigError


@dataclass
class RunConfig:
    grid: dict = field(default_factory=lambda: {"L": 30.0, "N": 3000})
    model: dict = field(
        default_factory=lambda: {
            "potential": {
                "kind": "double_gaussian_well",
                "depth": 2.0,
                "separation": 2.0,
                "width": 1.0,
            },
            "gamma": -1.0,
            "p": 2.0,
        }
    )
    continuation: dict = field(
        default_factory=lambda: {
            "ds_init": 0.05,
            "ds_min": 1e-6,
            "ds_max": 1.0,
            "E_min": 1e-3,
            "E_max": 200.0,
            "norm_max": 1e6,
            "max_steps": 5000,
        }
    )
    tolerances: dict = field(
        default_factory=lambda: {
            "tol_residual": 1e-10,
            "event_tol": None,
            "slope_tol": None,
        }
    )
    seeds: dict = field(
        default_factory=lambda: {
            "trivial": True,
            "amplitude": 1e-2,
            "explicit": None,
            "variational": None,
        }
    )
    evolution: dict = field(
        default_factory=lambda: {"dt": 1e-3, "T": 50.0, "eps": 1e-3, "sample_every": 50}
    )
    scan: dict = field(default_factory=lambda: {"mu_values": [0.05, 0.1, 0.3, 0.6, 1.2, 2.4]})
    suite: dict = field(
        default_factory=lambda: {
            "scaling_E": [25.0, 50.0, 100.0, 200.0],
            "rescale_E": [100.0, 200.0],
            "branch": None,
            "probe_directions": ["lplus_ground", "mirror_antisymmetric"],
        }
    )
    output: dict = field(default_factory=lambda: {"directory": None, "profile_every": 10})
    budget: int = 16
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _merge(base: dict, extra: dict, path: str = "") -> dict:
    out = dict(base)
    for k, v in extra.items():
        if k not in base:
            raise ConfigError(f"unknown config key {path + k!r}")
        if isinstance(base[k], dict) and isinstance(v, dict):
            out[k] = _merge(base[k], v, path + k + ".")
        else:
            out[k] = v
    return out


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def validate(cfg: RunConfig) -> RunConfig:
    g = cfg.grid
    _require(g["L"] > 0, "grid.L must be positive")
    _require(int(g["N"]) >= 3, "grid.N must be at least 3")
    pot = cfg.model["potential"]
    _require(
        pot["kind"] in ("zero", "single_gaussian_well", "double_gaussian_well"),
        f"unknown potential kind {pot['kind']!r}",
    )
    _require(pot["depth"] >= 0, "potential.depth must be >= 0")
    _require(pot["separation"] >= 0, "potential.separation must be >= 0")
    _require(pot["width"] > 0, "potential.width must be > 0")
    _require(cfg.model["p"] > 0, "model.p must be > 0")
    c = cfg.continuation
    _require(0 < c["ds_min"] <= c["ds_init"] <= c["ds_max"], "need 0 < ds_min <= ds_init <= ds_max")
    _require(c["E_max"] > c["E_min"] > 0, "need E_max > E_min > 0")
    _require(c["norm_max"] > 0, "norm_max must be positive")
    t = cfg.tolerances
    _require(t["tol_residual"] > 0, "tol_residual must be positive")
    if t["event_tol"] is not None:
        _require(t["event_tol"] > 0, "event_tol must be positive")
    if t["slope_tol"] is not None:
        _require(t["slope_tol"] > 0, "slope_tol must be positive")
    _require(cfg.evolution["dt"] > 0 and cfg.evolution["T"] > 0, "evolution dt and T must be positive")
    _require(cfg.budget >= 1, "budget must be at least 1")
    ex = cfg.seeds.get("explicit")
    if ex is not None:
        _require(
            isinstance(ex, dict) and "profile" in ex and "E" in ex,
            "seeds.explicit needs {profile: path, E: value}",
        )
        _require(ex["E"] > 0, "seeds.explicit.E must be positive")
    var = cfg.seeds.get("variational")
    if var is not None:
        _require(
            isinstance(var, dict) and var.get("mu", 0) > 0,
            "seeds.variational needs {mu: positive value}",
        )
    return cfg


def from_dict(d: dict) -> RunConfig:
    base = RunConfig()
    merged = _merge(base.to_dict(), d)
    cfg = RunConfig(**merged)
    return validate(cfg)


def load_config(path: str) -> RunConfig:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path) as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    return from_dict(data)


def p_is_even_integer(p: float) -> bool:
    return p > 0 and math.isclose(p, round(p)) and round(p) % 2 == 0
