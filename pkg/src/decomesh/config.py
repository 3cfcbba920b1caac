"""Layered settings: CLI flags > DECOMESH_* environment variables > TOML file."""

from __future__ import annotations

import os

try:
    import tomllib
except ModuleNotFoundError:   # Python < 3.11
    import tomli as tomllib

DEFAULTS = {
    "tau_2d": 0.85,
    "tau": 0.95,
    "theta": 0.02,
    "epsilon": 0.10,
    "tau_floor": 0.0,
    "max_rounds": 200,
    "tau_d": 0.05,
    "samples": 100_000,
}


def load_config_file(path):
    if path is None:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


class Settings:
    def __init__(self, config_path=None, env=None):
        self.file_values = load_config_file(config_path)
        self.env = os.environ if env is None else env

    def get(self, name, flag_value=None, cast=float):
        if flag_value is not None:
            return flag_value
        env_key = "DECOMESH_" + name.upper()
        if env_key in self.env:
            return cast(self.env[env_key])
        if name in self.file_values:
            return cast(self.file_values[name])
        return DEFAULTS[name]
