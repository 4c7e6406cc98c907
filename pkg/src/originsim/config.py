"""Run configuration: a single YAML file with every model parameter.

``DEFAULTS`` is the complete schema; user files may override any subset and
unknown or ill-typed keys are rejected with a field-level message. A null
sill/nugget requests a variogram fit on the configured fit year, whose
result is then reused for every simulated year.
"""

from __future__ import annotations

import copy
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from .errors import DomainError
from .geodata import Dataset, active_conflicts
from .grids import GridSpec
from .simulate import YearConfig, default_grid
from .surface import CovarianceParams, empirical_variogram, fit_variogram

DEFAULTS: dict[str, Any] = {
    "seed": 20210101,
    "years": [1825],
    "n_captives": 10_000,
    "covariance": {
        "nu": 5.0,
        "inv_range": 0.1,   # 1/km; 10 km range under the 1/a convention
        "sill": None,        # null -> fit by variogram on variogram.fit_year
        "nugget": None,
    },
    "variogram": {
        "fit_year": 1828,
        "n_bins": 15,
        "max_dist_km": 120.0,
    },
    "grid": {
        "nx": 256,
        "ny": 192,
        "pad_km": 25.0,
    },
    "costs": {
        "c_max": 3.0,
        "samples_per_edge": 100,
    },
    "mdp": {
        "epsilon": 0.1,
        "gamma": 1.0,
        "max_steps": 500,
    },
    "rewards": {
        "mean": 10.0,        # scalar or {city: value}
        "sd": 1.0,
    },
    "kde": {
        "bandwidth_km": 1.0,
    },
    "search": {
        "c_max": [1.0, 3.0, 6.0],
        "epsilon": [0.0, 0.1, 0.3],
        "reward_sd": [0.0, 1.0, 5.0],
    },
}

# keys whose value may be either a scalar or a per-city mapping
_POLYMORPHIC = {"rewards.mean", "rewards.sd"}
# keys that may be null
_NULLABLE = {"covariance.sill", "covariance.nugget"}


class ConfigError(DomainError):
    """A config file key is unknown or has the wrong type."""


def dump_defaults() -> str:
    return yaml.safe_dump(DEFAULTS, sort_keys=False)


def _merge(base: dict, override: Mapping, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key {here!r}")
        current = base[key]
        if isinstance(current, dict) and here not in _POLYMORPHIC:
            if not isinstance(value, Mapping):
                raise ConfigError(f"{here!r} must be a mapping")
            out[key] = _merge(current, value, here)
        else:
            out[key] = _check_type(here, current, value)
    return out


def _check_type(path: str, default, value):
    if value is None:
        if path in _NULLABLE:
            return None
        raise ConfigError(f"{path!r} must not be null")
    if path in _POLYMORPHIC:
        if isinstance(value, Mapping):
            return {str(k): float(v) for k, v in value.items()}
        return float(value)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{path!r} must be a boolean")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, (int,)):
            raise ConfigError(f"{path!r} must be an integer")
        return value
    if isinstance(default, float) or default is None:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(f"{path!r} must be a number")
        return float(value)
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{path!r} must be a list")
        return value
    return value


def load_config(path: str | Path | None = None,
                overrides: Mapping | None = None) -> dict:
    """Defaults, then the YAML file, then programmatic overrides."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
        if raw is None:
            raw = {}
        if not isinstance(raw, Mapping):
            raise ConfigError(f"{path}: top level must be a mapping")
        cfg = _merge(cfg, raw)
    if overrides:
        cfg = _merge(cfg, overrides)
    return cfg


def covariance_from_config(cfg: Mapping, data: Dataset) -> CovarianceParams:
    """Covariance parameters, fitting sill/nugget on the fit year if unset."""
    cov = cfg["covariance"]
    sill, nugget = cov["sill"], cov["nugget"]
    if sill is None or nugget is None:
        fitted_sill, fitted_nugget = fit_sill_nugget(cfg, data)
        sill = fitted_sill if sill is None else sill
        nugget = fitted_nugget if nugget is None else nugget
    return CovarianceParams(nu=cov["nu"], inv_range=cov["inv_range"],
                            sill=sill, nugget=nugget)


def fit_sill_nugget(cfg: Mapping, data: Dataset) -> tuple[float, float]:
    vg = cfg["variogram"]
    events = active_conflicts(data.conflicts, vg["fit_year"])
    if len(events) < 2:
        raise DomainError(
            f"variogram fit year {vg['fit_year']} has fewer than 2 active "
            f"conflicts")
    x, y = data.frame.project(np.array([e.lon for e in events]),
                              np.array([e.lat for e in events]))
    emp = empirical_variogram(np.column_stack([x, y]),
                              [float(e.intensity) for e in events],
                              n_bins=vg["n_bins"],
                              max_dist=vg["max_dist_km"])
    sill, nugget = fit_variogram(emp, nu=cfg["covariance"]["nu"],
                                 inv_range=cfg["covariance"]["inv_range"])
    # a kriging system needs a strictly positive sill
    return max(sill, 1e-8), nugget


def grid_from_config(cfg: Mapping, data: Dataset) -> GridSpec:
    g = cfg["grid"]
    return default_grid(data, nx=g["nx"], ny=g["ny"], pad_km=g["pad_km"])


def year_config(cfg: Mapping, year: int, data: Dataset,
                covariance: CovarianceParams | None = None) -> YearConfig:
    """Materialize one year's pipeline configuration."""
    if covariance is None:
        covariance = covariance_from_config(cfg, data)
    return YearConfig(
        year=year,
        covariance=covariance,
        c_max=cfg["costs"]["c_max"],
        epsilon=cfg["mdp"]["epsilon"],
        gamma=cfg["mdp"]["gamma"],
        reward_mean=cfg["rewards"]["mean"],
        reward_sd=cfg["rewards"]["sd"],
        n_captives=cfg["n_captives"],
        seed=cfg["seed"],
        grid=grid_from_config(cfg, data),
        samples_per_edge=cfg["costs"]["samples_per_edge"],
        max_steps=cfg["mdp"]["max_steps"],
    )
