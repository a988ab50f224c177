import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from randentire.errors import CircleRootProximity
from randentire.functionals import (abs_log_moment, characteristic_T, characteristic_T_base, circle_log_integral,
                                    count_zeros_argument, counting_N, find_zeros, jensen_residual,
                                    log_sigma_omega, proximity_m, sigma_omega_integral, sigma_omega_parseval,
                                    with_jitter, x_r_functional)
from randentire.models import RandomModel, TruncatedSample, sample_function
from randentire.series import CoefficientSequence, log_sigma, truncation_degree

EXP = CoefficientSequence.exponential()


def poly(coeffs):
    return TruncatedSample.from_coefficients(coeffs)


def from_roots(roots, lead=1.0):
    return poly(lead * np.poly(roots)[::-1])


@pytest.mark.parametrize("r", [0.5, 5.0, 10.0, 20.0, 40.0])
def test_characteristic_of_exponential(r):
    assert characteristic_T_base(EXP, r) == pytest.approx(r / math.pi, rel=1e-12)


def test_characteristic_mittag_leffler_oracle():
    # mpmath, integrating log|E| between its two unit-level crossings
    ml = CoefficientSequence.mittag_leffler(2.0)
    assert characteristic_T_base(ml, 3.0) == pytest.approx(1.6132555619253195603, abs=1e-10)


def test_identity_characteristic_slack():
    z = poly([0, 1])
    for r in (0.5, 2.0, 7.0):
        t = characteristic_T(z, r)
        assert t == pytest.approx(max(math.log(r), 0.0), abs=1e-12)
        assert log_sigma_omega(z, r) == pytest.approx(math.log(r))


def test_circle_log_integral_with_target():
    # roots of z^2 - 4 lie at |z| = 2; outside r = 1, so the mean is log 4
    assert circle_log_integral(poly([0, 0, 1]), 1.0, a=4.0) == pytest.approx(math.log(4.0), abs=1e-10)


def test_find_zeros_and_counting():
    p = poly(np.concatenate([[0, 0], np.poly([2.0, -0.5j])[::-1]]))
    zs = find_zeros(p, 0.0, 3.0)
    assert zs.origin_multiplicity == 2
    assert zs.moduli == pytest.approx((0.5, 2.0))
    assert zs.count(1.0) == 3
    assert zs.count() == 4
    expected = 2 * math.log(3.0) + math.log(3.0 / 0.5) + math.log(3.0 / 2.0)
    assert counting_N(zs, 3.0) == pytest.approx(expected, rel=1e-13)
    with pytest.raises(ValueError):
        counting_N(zs, 4.0)


def test_find_zeros_shifted_target():
    p = poly([0, 0, 1])
    zs = find_zeros(p, 4.0, 5.0)
    assert zs.moduli == pytest.approx((2.0, 2.0))
    assert zs.origin_multiplicity == 0


def test_argument_count_known_polynomial():
    p = from_roots([0.5, 1.5j, -2.5, 3.5])
    assert [count_zeros_argument(p, r) for r in (0.25, 1.0, 2.0, 3.0, 4.0)] == [0, 1, 2, 3, 4]


def test_root_on_circle_and_jitter():
    p = from_roots([1.0, -3.0])
    with pytest.raises(CircleRootProximity):
        count_zeros_argument(p, 1.0)
    n, r_used = with_jitter(lambda rk: count_zeros_argument(p, rk), 1.0)
    assert n == 1 and r_used > 1.0


def test_double_root_on_circle_defeats_jitter():
    p = from_roots([1.0, 1.0])
    with pytest.raises(CircleRootProximity):
        with_jitter(lambda rk: count_zeros_argument(p, rk), 1.0)


def test_jensen_residual_cases():
    assert jensen_residual(poly([0, 0, 0, 5]), 7.0) == pytest.approx(0.0, abs=1e-12)
    assert jensen_residual(from_roots([0.3, -1.2, 2.0 + 1j], lead=3.0), 1.7) < 1e-10
    s = sample_function(EXP, "gaussian", 93, 5, 2)
    assert jensen_residual(s, 40.0) < 1e-8


def test_parseval_two_sides():
    s = sample_function(EXP, "steinhaus", 60, 1, 0)
    for r in (0.5, 4.0, 20.0):
        assert sigma_omega_integral(s, r) == pytest.approx(sigma_omega_parseval(s, r), rel=1e-12)


def test_x_r_trivial_and_oracle():
    assert x_r_functional(poly([0, 1]), 3.0, 3.0) == pytest.approx(0.0, abs=1e-12)
    # twice the positive part of log|1 + e^{it}|
    assert x_r_functional(poly([1, 1]), 1.0, 1.0) == pytest.approx(2 * 0.3230659472194505141, abs=1e-10)
    assert abs_log_moment(poly([1, 1]), 0.0, 1.0, 2.0) == pytest.approx(math.pi ** 2 / 12, abs=1e-10)


def test_x_r_log_sigma_form_matches_sigma_form():
    s = sample_function(EXP, "rademacher", 40, 9, 3)
    sig = math.exp(log_sigma(EXP, 6.0))
    assert x_r_functional(s, sig, 6.0) == pytest.approx(x_r_functional(s, None, 6.0, log_sigma_f=math.log(sig)))


def test_x_r_rejects_bad_sigma():
    with pytest.raises(ValueError):
        x_r_functional(poly([1, 1]), 0.0, 1.0)


models = st.sampled_from(list(RandomModel))
seeds = st.integers(0, 2 ** 32)


@given(models, seeds, st.floats(0.5, 15.0), st.floats(1.0, 1.5))
def test_counting_N_nondecreasing(model, seed, r1, factor):
    s = sample_function(EXP, model, 50, seed, 0)
    zs = find_zeros(s, 0.0, r1 * factor)
    assert counting_N(zs, r1) <= counting_N(zs, r1 * factor) + 1e-12


@given(models, seeds, st.floats(0.5, 12.0), st.complex_numbers(max_magnitude=1e4, allow_nan=False,
                                                                  allow_infinity=False))
def test_first_main_theorem_bound(model, seed, r, a):
    s = sample_function(EXP, model, truncation_degree(EXP, 12.0), seed, 1)
    diff = abs(proximity_m(s, r, a=a) - proximity_m(s, r))
    log_plus = math.log(abs(a)) if abs(a) > 1 else 0.0
    assert diff <= log_plus + math.log(2.0) + 1e-7


@given(models, seeds, st.floats(0.5, 20.0))
def test_parseval_property(model, seed, r):
    s = sample_function(EXP, model, truncation_degree(EXP, 20.0), seed, 0)
    assert sigma_omega_integral(s, r) == pytest.approx(sigma_omega_parseval(s, r), rel=1e-10)
