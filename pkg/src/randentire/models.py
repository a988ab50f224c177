"""Coefficient laws and seeded random samples of ``f_omega``.

Every trial draws from its own Philox stream keyed by ``(seed, trial_index)``
through :class:`numpy.random.SeedSequence`, so trials can run in any order on
any number of workers and still reproduce bit for bit.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .series import CoefficientSequence

_HALF_SQRT = math.sqrt(0.5)


class RandomModel(str, enum.Enum):
    GAUSSIAN = "gaussian"
    RADEMACHER = "rademacher"
    STEINHAUS = "steinhaus"

    @classmethod
    def parse(cls, name) -> "RandomModel":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            raise ConfigError(f"unknown model {name!r}; expected one of "
                              f"{[m.value for m in cls]}") from None


def trial_stream(seed: int, trial_index: int) -> np.random.Generator:
    """Independent generator for one trial; injective in ``(seed, trial_index)``."""
    if seed < 0 or trial_index < 0:
        raise ValueError("seed and trial_index must be nonnegative")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(trial_index),))
    return np.random.Generator(np.random.Philox(ss))


def draw(model: RandomModel, rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` i.i.d. copies of chi, each with mean 0 and E|chi|^2 = 1."""
    model = RandomModel.parse(model)
    if model is RandomModel.GAUSSIAN:
        # density exp(-|z|^2)/pi: variance 1/2 per real component
        xy = rng.standard_normal((size, 2)) * _HALF_SQRT
        return xy[:, 0] + 1j * xy[:, 1]
    if model is RandomModel.RADEMACHER:
        return (2.0 * rng.integers(0, 2, size=size) - 1.0).astype(complex)
    theta = rng.random(size)
    return np.exp(2j * np.pi * theta)


def sample_chi(model: RandomModel, rng: np.random.Generator) -> complex:
    return complex(draw(model, rng, 1)[0])


@dataclass(frozen=True, eq=False)
class TruncatedSample:
    """One realization of ``f_omega`` truncated to degree N."""

    coefficients: np.ndarray
    model: RandomModel | None = None
    seed: int | None = None
    trial_index: int | None = None
    base_id: str = ""

    @property
    def degree(self) -> int:
        return self.coefficients.size - 1

    @classmethod
    def from_coefficients(cls, coeffs, base_id="") -> "TruncatedSample":
        c = np.array(coeffs, dtype=complex).ravel()
        if c.size == 0:
            raise ValueError("empty coefficient vector")
        return cls(c, base_id=base_id)


def sample_function(seq: CoefficientSequence, model: RandomModel, degree: int,
                    seed: int, trial_index: int) -> TruncatedSample:
    """Draw ``f_omega`` truncated at ``degree``: coefficients ``chi_j a_j``."""
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    model = RandomModel.parse(model)
    chi = draw(model, trial_stream(seed, trial_index), degree + 1)
    coeffs = chi * seq.coefficients(degree)
    return TruncatedSample(coeffs, model, int(seed), int(trial_index), seq.base_id)


def empirical_moments(model: RandomModel, n: int, seed: int):
    """Sample mean of chi and of |chi|^2 over ``n`` draws."""
    if n < 1:
        raise ValueError("n must be >= 1")
    chi = draw(model, np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed)))), n)
    return complex(np.mean(chi)), float(np.mean(np.abs(chi) ** 2))


def as_coefficients(sample) -> np.ndarray:
    """Coefficient vector of a sample or of anything array-like."""
    if isinstance(sample, TruncatedSample):
        return sample.coefficients
    return np.asarray(sample, dtype=complex).ravel()
