"""Declarative run descriptions, read from and written to JSON.

Every key mirrors a dataclass field name; unknown keys are errors so a typo
never silently falls back to a default.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ConfigError
from .models import RandomModel
from .quadrature import QuadratureSpec
from .series import (CoefficientSequence, TruncationPolicy, complex_from_json, complex_to_json,
                     log_sigma, log_sigma_derivative, parse_base_id, star_transform,
                     truncation_degree)

EXPERIMENTS = ("theorem1", "value_a", "bounds", "nns", "tails", "condition_y",
               "gaussian_cdf", "moment_growth")
# experiments driven by `tails`; the rest by `verify`
TAIL_EXPERIMENTS = ("tails", "condition_y", "gaussian_cdf", "moment_growth")
STATISTICAL_FLOOR = 100
FORMATS = ("csv", "jsonl")
U64 = 2 ** 64


@dataclass(frozen=True)
class Constants:
    """Condition-Y constants ``A``, ``B``, the band exponent ``C`` and the
    tail parameters ``tau``, ``epsilon``; ``delta`` widens the general
    value band by ``(1 + delta) log log sigma``."""

    A: float = 2.0 / 1.1
    B: float = 1.0
    C: float = 1.2
    tau: float = 0.1
    epsilon: float = 1.0
    delta: float = 0.25

    def __post_init__(self):
        for name in ("A", "B", "tau", "epsilon"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} > 0 required")
        if not self.C > 1:
            raise ConfigError("C > 1 required")
        if not self.delta >= 0:
            raise ConfigError("delta >= 0 required")

    @property
    def band_factor(self) -> float:
        return (self.C / self.A) ** (1.0 / self.B)


@dataclass(frozen=True)
class Thresholds:
    """Pass/fail gates checked by ``verify`` and ``tails``; None disables a gate."""

    max_final_violation: float | None = None
    monotone_se: float | None = 3.0
    max_failure_rate: float = 0.01
    max_slack_variation: float | None = 2.0
    gamma_floor: float | None = 0.45
    tail_se: float = 3.0


@dataclass(frozen=True)
class OutputSpec:
    path: str = "out"
    format: str = "csv"

    def __post_init__(self):
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}, got {self.format!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    base: CoefficientSequence
    model: RandomModel
    radii: tuple
    trials: int
    seed: int = 0
    constants: Constants = field(default_factory=Constants)
    target_values: tuple = ()
    truncation: TruncationPolicy = field(default_factory=TruncationPolicy)
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)
    output: OutputSpec = field(default_factory=OutputSpec)
    thresholds: Thresholds = field(default_factory=Thresholds)
    x_grid: tuple = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0)
    p_grid: tuple = (1.0, 1.5, 2.0, 3.0, 4.0)
    theta: float = 0.0
    name: str = ""

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        object.__setattr__(self, "model", RandomModel.parse(self.model))
        radii = tuple(float(r) for r in self.radii)
        if not radii:
            raise ConfigError("radii must be nonempty")
        if not all(r > 0 and math.isfinite(r) for r in radii):
            raise ConfigError("radii must be positive and finite")
        if any(b <= a for a, b in zip(radii, radii[1:])):
            raise ConfigError("radii must be strictly increasing")
        object.__setattr__(self, "radii", radii)
        if isinstance(self.trials, bool) or int(self.trials) != self.trials or self.trials < 1:
            raise ConfigError("trials >= 1 required")
        object.__setattr__(self, "trials", int(self.trials))
        if not 0 <= int(self.seed) < U64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "target_values", tuple(complex(a) for a in self.target_values))
        object.__setattr__(self, "x_grid", tuple(float(x) for x in self.x_grid))
        object.__setattr__(self, "p_grid", tuple(float(p) for p in self.p_grid))
        if any(x < 1 for x in self.x_grid) or list(self.x_grid) != sorted(self.x_grid):
            raise ConfigError("x_grid must be increasing with entries >= 1")
        if self.base.nonzero_count() < 2:
            raise ConfigError("base must have >= 2 nonzero coefficients for log log sigma to grow")

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "experiment": self.experiment,
            "base": self.base.to_dict(),
            "model": self.model.value,
            "radii": list(self.radii),
            "trials": self.trials,
            "seed": self.seed,
            "constants": asdict(self.constants),
            "target_values": [complex_to_json(a) for a in self.target_values],
            "truncation": asdict(self.truncation),
            "quadrature": asdict(self.quadrature),
            "output": asdict(self.output),
            "thresholds": asdict(self.thresholds),
            "x_grid": list(self.x_grid),
            "p_grid": list(self.p_grid),
            "theta": self.theta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        _reject_unknown(d, {f.name for f in fields(cls)}, "config")
        kw = dict(d)
        for key in ("experiment", "base", "model", "radii", "trials"):
            if key not in kw:
                raise ConfigError(f"config needs {key!r}")
        base = kw["base"]
        kw["base"] = parse_base_id(base) if isinstance(base, str) else CoefficientSequence.from_dict(base)
        sub = {"constants": Constants, "truncation": TruncationPolicy, "quadrature": QuadratureSpec,
               "output": OutputSpec, "thresholds": Thresholds}
        for key, typ in sub.items():
            if key in kw:
                kw[key] = _build(typ, kw[key], key)
        if "target_values" in kw:
            kw["target_values"] = tuple(complex_from_json(a) for a in kw["target_values"])
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_json(text)


def _reject_unknown(d, allowed, where):
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown {where} keys: {sorted(unknown)}")


def _build(typ, value, where):
    if not isinstance(value, dict):
        raise ConfigError(f"{where} must be an object")
    _reject_unknown(value, {f.name for f in fields(typ)}, where)
    try:
        return typ(**value)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def validate_for_run(cfg: ExperimentConfig) -> None:
    """Experiment-specific preconditions beyond the field invariants."""
    exp = cfg.experiment
    base, pol = cfg.base, cfg.truncation
    try:
        lsig = [log_sigma(base, r, pol) for r in cfg.radii]
    except Exception as exc:
        raise ConfigError(f"base not admitted by truncation policy: {exc}") from None
    if exp in ("theorem1", "value_a") and not lsig[0] > 1.0:
        raise ConfigError(f"log log sigma(r, f) must be positive at r={cfg.radii[0]} "
                          f"(log sigma = {lsig[0]:.4g})")
    if exp == "value_a":
        if not cfg.target_values:
            raise ConfigError("value_a needs nonempty target_values")
        try:
            truncation_degree(star_transform(base), cfg.radii[-1], pol)
        except Exception as exc:
            raise ConfigError(f"star transform of base not admitted by truncation: {exc}") from None
    if exp == "bounds" and not all(v > math.e for v in lsig):
        raise ConfigError("bounds suite needs log sigma(r, f) > e at every radius")
    if exp == "nns":
        if cfg.model is not RandomModel.RADEMACHER:
            raise ConfigError("nns check needs the rademacher model")
        s = [log_sigma_derivative(base, r, pol) for r in cfg.radii]
        if max(s) - min(s) <= 1e-12 * max(1.0, max(s)):
            raise ConfigError("r d/dr log sigma is constant on the grid (monomial-like base)")
    if exp in TAIL_EXPERIMENTS and cfg.trials < STATISTICAL_FLOOR:
        raise ConfigError(f"statistical floor: {exp} needs trials >= {STATISTICAL_FLOOR}")
    if exp == "gaussian_cdf" and cfg.model is not RandomModel.GAUSSIAN:
        raise ConfigError("gaussian_cdf needs the gaussian model")
    if exp == "moment_growth":
        if cfg.model is not RandomModel.RADEMACHER:
            raise ConfigError("moment_growth needs the rademacher model")
        if not cfg.p_grid or any(not 1.0 <= p <= 4.0 for p in cfg.p_grid):
            raise ConfigError("p_grid must lie in [1, 4]")
        if list(cfg.p_grid) != sorted(set(cfg.p_grid)):
            raise ConfigError("p_grid must be strictly increasing")


@dataclass(frozen=True)
class RunManifest:
    config_path: str
    config: ExperimentConfig
    output_dir: str
    format: str = "csv"
    workers: int | str = 1

    def __post_init__(self):
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}")
        if self.workers != "auto" and (isinstance(self.workers, bool) or not isinstance(self.workers, int)
                                       or self.workers < 1):
            raise ConfigError("workers must be a positive integer or 'auto'")

    @property
    def worker_count(self) -> int:
        return (os.cpu_count() or 1) if self.workers == "auto" else int(self.workers)

    @classmethod
    def build(cls, config_path, out=None, seed=None, workers=1, fmt=None) -> "RunManifest":
        cfg = ExperimentConfig.load(config_path)
        if seed is not None:
            cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "seed": seed})
        fmt = fmt or cfg.output.format
        out = out or cfg.output.path
        if isinstance(workers, str) and workers != "auto":
            try:
                workers = int(workers)
            except ValueError:
                raise ConfigError(f"workers must be an integer or 'auto', got {workers!r}") from None
        out_path = Path(out)
        try:
            out_path.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"output dir {out} not writable: {exc}") from None
        if not os.access(out_path, os.W_OK):
            raise ConfigError(f"output dir {out} not writable")
        return cls(str(config_path), cfg, str(out_path), fmt, workers)
