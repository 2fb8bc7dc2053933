"""Experiment configuration: a validated JSON file plus CLI/env overrides."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np

from .copulas import GUMBEL_METHODS
from .errors import ConfigError
from .evaluate import default_grid
from .regressors import RegressorSpec
from .scores import ECDF_DIVISORS

COPULA_NAMES = ("independent", "gumbel", "empirical")
# short CLI spellings for the Gumbel estimator
_ESTIMATOR_ALIASES = {"tau": "tau_inversion", "mple": "pairwise_mple"}

_TOP_LEVEL_KEYS = {
    "dataset", "targets", "regressor", "error_model", "beta", "copulas",
    "gumbel_estimator", "grid", "fold_count", "calibration_fraction", "seed",
    "output_dir", "jobs", "ecdf_divisor",
}


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    targets: tuple[str, ...]
    regressor: RegressorSpec = field(default_factory=RegressorSpec)
    error_model: RegressorSpec = field(default_factory=RegressorSpec)
    beta: float = 0.1
    copulas: tuple[str, ...] = COPULA_NAMES
    gumbel_estimator: str = "tau_inversion"
    grid: tuple[float, ...] = ()
    fold_count: int = 10
    calibration_fraction: float = 0.10
    seed: int = 0
    output_dir: str = "conformalbox_out"
    jobs: int = 1
    ecdf_divisor: str = "n"

    def __post_init__(self):
        if not self.targets:
            raise ConfigError("targets: need at least one target column name")
        object.__setattr__(self, "targets", tuple(str(t) for t in self.targets))
        copulas = tuple(self.copulas)
        if not copulas:
            raise ConfigError("copulas: need at least one entry")
        for name in copulas:
            if name not in COPULA_NAMES:
                raise ConfigError(
                    f"copulas: {name!r} is not a valid copula (choose from {COPULA_NAMES})"
                )
        object.__setattr__(self, "copulas", copulas)
        estimator = _ESTIMATOR_ALIASES.get(self.gumbel_estimator, self.gumbel_estimator)
        if estimator not in GUMBEL_METHODS:
            raise ConfigError(
                f"gumbel_estimator: {self.gumbel_estimator!r} is not valid "
                f"(choose from {sorted(_ESTIMATOR_ALIASES) + list(GUMBEL_METHODS)})"
            )
        object.__setattr__(self, "gumbel_estimator", estimator)
        grid = tuple(float(g) for g in self.grid) or tuple(float(g) for g in default_grid())
        if any(not 0.0 < g < 1.0 for g in grid):
            raise ConfigError("grid: every level must lie strictly inside (0, 1)")
        if len(set(grid)) != len(grid):
            raise ConfigError("grid: levels must be distinct")
        object.__setattr__(self, "grid", tuple(sorted(grid)))
        if self.beta < 0:
            raise ConfigError(f"beta: must be >= 0, got {self.beta}")
        if self.fold_count < 2:
            raise ConfigError(f"fold_count: must be >= 2, got {self.fold_count}")
        if not 0.0 < self.calibration_fraction < 1.0:
            raise ConfigError(
                f"calibration_fraction: must be in (0, 1), got {self.calibration_fraction}"
            )
        if self.jobs < 1:
            raise ConfigError(f"jobs: must be >= 1, got {self.jobs}")
        if self.ecdf_divisor not in ECDF_DIVISORS:
            raise ConfigError(
                f"ecdf_divisor: must be one of {ECDF_DIVISORS}, got {self.ecdf_divisor!r}"
            )
        if not isinstance(self.seed, (int, np.integer)) or isinstance(self.seed, bool):
            raise ConfigError(f"seed: must be an integer, got {self.seed!r}")

    def replace(self, **kwargs):
        return dataclasses.replace(self, **kwargs)

    def to_dict(self):
        return {
            "dataset": self.dataset,
            "targets": list(self.targets),
            "regressor": self.regressor.to_dict(),
            "error_model": self.error_model.to_dict(),
            "beta": self.beta,
            "copulas": list(self.copulas),
            "gumbel_estimator": self.gumbel_estimator,
            "grid": list(self.grid),
            "fold_count": self.fold_count,
            "calibration_fraction": self.calibration_fraction,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "jobs": self.jobs,
            "ecdf_divisor": self.ecdf_divisor,
        }


def config_from_dict(data, source="<config>"):
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    unknown = set(data) - _TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"{source}: unknown keys {sorted(unknown)}")
    for key in ("dataset", "targets"):
        if key not in data:
            raise ConfigError(f"{source}: missing required key {key!r}")
    kwargs = dict(data)
    kwargs["regressor"] = RegressorSpec.from_dict(kwargs.get("regressor", {}))
    kwargs["error_model"] = RegressorSpec.from_dict(kwargs.get("error_model", {}))
    if "targets" in kwargs:
        kwargs["targets"] = tuple(kwargs["targets"])
    if "copulas" in kwargs:
        kwargs["copulas"] = tuple(kwargs["copulas"])
    if "grid" in kwargs:
        kwargs["grid"] = tuple(kwargs["grid"])
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path) -> ExperimentConfig:
    """Parse and validate a JSON experiment config; errors name the file and,
    for syntax problems, the line."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from None
    try:
        return config_from_dict(data, source=str(path))
    except ConfigError:
        raise
