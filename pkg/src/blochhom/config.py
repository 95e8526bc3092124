"""Experiment configuration: TOML files to a validated dataclass."""
import hashlib
import json
from dataclasses import dataclass, field, asdict

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:          # python < 3.11
    import tomli as tomllib

from .tensors import field_from_json, read_field


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Everything a study run needs, with deterministic defaults."""
    medium: dict
    K: int
    theta: list = field(default_factory=lambda: [1.0, 0.0, 0.0])
    j_range: list = field(default_factory=lambda: [2, 3, 4, 5, 6])
    chi_grid_n: int = 3
    gammas: list = field(default_factory=lambda: [-0.5, 0.0, 1.0])
    eps_ladder: list = field(default_factory=lambda: [2.0 ** -j for j in range(1, 6)])
    z_sweep: int = 4
    pad: int = 2
    out_dir: str = "out"
    cache_dir: str = ""
    jobs: int = 1
    seed: int = 1234

    def __post_init__(self):
        if not isinstance(self.K, int) or self.K < 1:
            raise ConfigError(f"field 'K' must be a positive integer, got {self.K!r}")
        if len(self.theta) != 3 or not any(self.theta):
            raise ConfigError(f"field 'theta' must be a nonzero 3-vector, got {self.theta!r}")
        if not self.j_range:
            raise ConfigError("field 'j_range' must be nonempty")
        if self.chi_grid_n < 1:
            raise ConfigError(f"field 'chi_grid_n' must be >= 1, got {self.chi_grid_n}")
        if any(g <= -2.0 for g in self.gammas):
            raise ConfigError(f"field 'gammas' must exceed -2, got {self.gammas!r}")
        if any(e <= 0 for e in self.eps_ladder):
            raise ConfigError(f"field 'eps_ladder' must be positive, got {self.eps_ladder!r}")
        if self.pad < 1:
            raise ConfigError(f"field 'pad' must be >= 1, got {self.pad}")
        if self.jobs < 1:
            raise ConfigError(f"field 'jobs' must be >= 1, got {self.jobs}")

    def coefficient_field(self):
        m = self.medium
        if "path" in m:
            return read_field(m["path"])
        return field_from_json(m)

    def digest(self):
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def rng(self, offset=0):
        return np.random.default_rng(self.seed + offset)


_KNOWN = {f for f in ExperimentConfig.__dataclass_fields__}


def load_config(path, overrides=None):
    """Parse a TOML config file; unknown keys and missing fields are errors."""
    try:
        with open(path, 'rb') as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error in {path}: {exc}")
    unknown = set(raw) - _KNOWN
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    if "medium" not in raw:
        raise ConfigError("missing field: medium")
    if "K" not in raw:
        raise ConfigError("missing field: K")
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig(**raw)
    except TypeError as exc:
        raise ConfigError(f"bad config value: {exc}")
