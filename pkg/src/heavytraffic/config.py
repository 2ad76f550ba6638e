"""Experiment configuration: a TOML file plus command-line overrides (flags win)."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .stochastics import ArrivalKind, Boundary, SystemSpec, nsys_spec, switch_spec, threeq_spec, validate_eps

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = ["ConfigError", "ExperimentConfig", "load_config_file"]

TABLES = ("params", "run", "verify")


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


@dataclass
class ExperimentConfig:
    system: str = ""
    n: int | None = None
    nu: object = None
    mu: tuple = (1.0, 1.0)
    gamma: float = 1.0
    boundary: str = "F3"
    arrivals: str = "bernoulli"
    a_max: int = 1
    eps: list = field(default_factory=list)
    seeds: list = field(default_factory=lambda: [0])
    n_samples: int = 100_000
    burn_in: int | None = None
    thin: int | None = None
    replicas: int = 1
    workers: int = 1
    grid: str | None = None
    grid_size: int = 10
    compare_limit: bool = True
    law_samples: int = 100_000
    limiting_variance: bool = False
    out: str = "results"
    plots: bool = False

    @classmethod
    def from_sources(cls, file_values: dict | None = None, overrides: dict | None = None) -> "ExperimentConfig":
        values = dict(file_values or {})
        values.update({k: v for k, v in (overrides or {}).items() if v is not None})
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"unknown configuration field(s): {', '.join(unknown)}")
        cfg = cls(**values)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.system not in ("switch", "threeq", "nsys"):
            raise ConfigError(f"field 'system' must be switch, threeq or nsys, got {self.system!r}")
        self.eps = [float(e) for e in _as_list(self.eps)]
        if not self.eps:
            raise ConfigError("field 'eps' is required")
        for e in self.eps:
            try:
                validate_eps(e)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        self.seeds = [int(s) for s in _as_list(self.seeds)]
        if not self.seeds or any(not 0 <= s < 2**64 for s in self.seeds):
            raise ConfigError("field 'seeds' must hold 64-bit unsigned integers")
        for name in ("n_samples", "replicas", "workers", "grid_size", "law_samples", "a_max"):
            v = int(float(getattr(self, name)))
            if v < 1:
                raise ConfigError(f"field '{name}' must be >= 1")
            setattr(self, name, v)
        for name in ("burn_in", "thin"):
            v = getattr(self, name)
            if v is not None:
                v = int(float(v))
                if v < (0 if name == "burn_in" else 1):
                    raise ConfigError(f"field '{name}' is out of range")
                setattr(self, name, v)
        try:
            ArrivalKind(self.arrivals)
        except ValueError:
            raise ConfigError(f"field 'arrivals' must be one of {[k.value for k in ArrivalKind]}") from None
        if self.system == "switch":
            if self.nu is None:
                raise ConfigError("field 'nu' is required for the switch (a list of n^2 rates or 'uniform')")
            if self.nu == "uniform":
                if self.n is None:
                    raise ConfigError("field 'n' is required when nu = 'uniform'")
            else:
                nu = np.asarray(_as_list(self.nu), dtype=float)
                m = int(round(np.sqrt(nu.size)))
                if m * m != nu.size:
                    raise ConfigError("field 'nu' must have n^2 entries")
                if self.n is not None and int(self.n) != m:
                    raise ConfigError(f"field 'n' = {self.n} disagrees with {nu.size} entries of 'nu'")
                self.n = m
                self.nu = nu.tolist()
            self.n = int(self.n)
        elif self.system == "nsys":
            self.mu = tuple(float(v) for v in _as_list(self.mu))
            if len(self.mu) != 2 or min(self.mu) <= 0:
                raise ConfigError("field 'mu' must be two positive rates")
            try:
                Boundary(self.boundary)
            except ValueError:
                raise ConfigError("field 'boundary' must be F1, F2 or F3") from None
            if float(self.gamma) <= 0:
                raise ConfigError("field 'gamma' must be positive")
        for e in self.eps:
            try:
                self.spec(e)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None

    def spec(self, eps: float) -> SystemSpec:
        if self.system == "switch":
            nu = None if self.nu == "uniform" else self.nu
            return switch_spec(self.n, eps, nu=nu, arrivals=ArrivalKind(self.arrivals), a_max=self.a_max)
        if self.system == "threeq":
            nu = (0.5, 0.5, 0.5) if self.nu is None else tuple(_as_list(self.nu))
            return threeq_spec(eps, nu=nu, arrivals=ArrivalKind(self.arrivals), a_max=self.a_max)
        nu = None if self.nu is None else _as_list(self.nu)
        return nsys_spec(eps, mu=self.mu, gamma=float(self.gamma), boundary=self.boundary, nu=nu)

    def sim_kwargs(self) -> dict:
        return {"n_samples": self.n_samples, "burn_in": self.burn_in, "thin": self.thin}


def _as_list(v) -> list:
    if v is None:
        return []
    if isinstance(v, str):
        return [p for p in (s.strip() for s in v.split(",")) if p]
    if isinstance(v, (list, tuple, np.ndarray)):
        return list(v)
    return [v]


def load_config_file(path) -> dict:
    """Flatten a TOML file: top-level keys plus the tables ``[params]``, ``[run]``, ``[verify]``."""
    path = Path(path)
    try:
        doc = tomllib.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path}: {exc}") from None
    flat = {}
    for key, value in doc.items():
        if isinstance(value, dict):
            if key not in TABLES:
                raise ConfigError(f"unknown table [{key}] (expected one of {', '.join(TABLES)})")
            flat.update(value)
        else:
            flat[key] = value
    return flat
