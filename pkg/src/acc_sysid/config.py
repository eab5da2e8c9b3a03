"""TOML run configuration.

A config file has up to five tables, ``[ukf]``, ``[noise]``, ``[ls]``,
``[simulation]`` and ``[schema]``, with the keys listed in ``DEFAULTS``.
Unknown tables or keys are rejected. Command-line flags override file
values; see ``configs/reference.toml`` in the repository for a complete file.
"""

from __future__ import annotations

import copy
import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import InvalidConfigError

DEFAULTS = {
    "ukf": {
        "a": 1.0,
        "b": None,  # None -> 3 - n
        "eps": 0.0,
        "redraw": True,
        "x0": [35.0, 25.0, 0.08, 0.12, 1.5],
        "p0": [1.0, 1.0, 1.0, 1.0, 1.0],  # diagonal of the initial covariance
    },
    "noise": {
        "q": [2.0e-5, 5.0e-6, 1.0e-6, 1.0e-6, 1.0e-6],
        "r": [0.8, 0.2],
    },
    "ls": {
        "sigma": 1e-3,
        "x0": [0.98, 0.01, 0.01],
        "p0": 1e-3,
        "mu": 1.01,
        "init": "prior",
        "warmup_rows": 10,
    },
    "simulation": {
        "params": [0.1, 0.2, 1.2],
        "dt": 0.1,
        "duration": 600.0,
        "profile": "pe",
        "base_speed": 25.0,
        "step_time": 10.0,
        "step_size": 5.0,
        "initial": [40.0, 30.0],
        "process_std": [0.0, 0.0],
        "measurement_std": [0.0, 0.0],
        "seed": 0,
    },
    "schema": {
        "time": "t",
        "u": "u",
        "v": "v",
        "gap": "p",
        "leader_pos": None,
        "follower_pos": None,
        "lead_length": None,
        "engaged": None,
        "dt_target": None,
    },
}


def default_config() -> dict:
    return copy.deepcopy(DEFAULTS)


def merge(cfg: dict, overrides: dict) -> dict:
    """Return ``cfg`` updated with ``overrides`` ({table: {key: value}}); ``None`` values are skipped."""
    out = copy.deepcopy(cfg)
    for table, values in overrides.items():
        if table not in DEFAULTS:
            raise InvalidConfigError(f"unknown config table [{table}]")
        for key, value in values.items():
            if key not in DEFAULTS[table]:
                raise InvalidConfigError(f"unknown key {key!r} in [{table}]")
            if value is not None:
                out[table][key] = value
    return out


def load_config(path) -> dict:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise
    except tomllib.TOMLDecodeError as exc:
        raise InvalidConfigError(f"{path}: {exc}") from None
    for table, values in data.items():
        if not isinstance(values, dict):
            raise InvalidConfigError(f"{path}: top-level key {table!r} must be a table")
    return merge(default_config(), data)
