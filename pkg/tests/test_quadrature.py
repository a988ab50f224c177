import math

import numpy as np
import pytest

from randentire.errors import ConfigError
from randentire.quadrature import QuadratureSpec, eval_on_circle, log_mean, split_mean
from randentire.series import horner


@pytest.mark.parametrize("b, expected", [
    ([1.0], 0.0),
    ([-2.0, 1.0], math.log(2.0)),   # root outside
    ([1.0, -2.0], math.log(2.0)),   # root inside
    ([-1.0, 1.0], 0.0),             # root on the circle
    ([0.0, 0.0, 3.0], math.log(3.0)),
])
def test_log_mean_mahler_values(b, expected):
    assert log_mean(np.array(b, dtype=complex)) == pytest.approx(expected, abs=1e-9)


def test_split_mean_one_plus_w():
    # mpmath over the arcs |t| < 2 pi / 3
    pos, neg = split_mean(np.array([1, 1], dtype=complex), 0.0)
    assert pos == pytest.approx(0.3230659472194505141, abs=1e-11)
    assert neg == pytest.approx(pos, abs=1e-11)


def test_split_mean_second_power_total():
    pos, neg = split_mean(np.array([1, 1], dtype=complex), 0.0, power=2.0)
    assert pos + neg == pytest.approx(math.pi ** 2 / 12, abs=1e-10)


def test_split_mean_constant_modulus():
    b = np.array([0, 0, 1], dtype=complex)
    assert split_mean(b, -1.5) == (pytest.approx(1.5), 0.0)
    assert split_mean(b, 0.0) == (pytest.approx(0.0, abs=1e-15), pytest.approx(0.0, abs=1e-15))


def test_eval_on_circle_matches_horner(rng):
    b = rng.standard_normal(40) + 1j * rng.standard_normal(40)
    for size in (5, 1000):
        t = rng.uniform(0, 2 * np.pi, size)
        assert np.allclose(eval_on_circle(b, t), horner(b, np.exp(1j * t)), rtol=1e-12, atol=1e-12)


def test_spec_validation():
    assert QuadratureSpec().nodes_for(10) == 84
    assert QuadratureSpec(base_nodes=16).nodes_for(100) == 101
    for bad in ({"base_nodes": 4}, {"abs_tolerance": 0.0}, {"max_refinement_depth": -1}):
        with pytest.raises(ConfigError):
            QuadratureSpec(**bad)
