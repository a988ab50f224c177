import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from randentire.errors import ConfigError, TruncationFailure
from randentire.series import (CoefficientSequence, TruncationPolicy, coefficient, format_base_id, horner,
                               log_max_modulus, log_sigma, log_sigma_derivative, max_modulus,
                               parse_base_id, scaled_poly, sigma, star_transform, truncation_degree)

EXP = CoefficientSequence.exponential()
FP = CoefficientSequence.factorial_power(2.0, 0.5)
ML = CoefficientSequence.mittag_leffler(2.0)
BASES = [EXP, FP, ML, CoefficientSequence.explicit([1, -2, 0, 3])]
# radius and factor pairs inside every base's certified range
radii = st.floats(0.05, 8.0)
factors = st.floats(1.01, 2.5)


# frozen from mpmath: sqrt(I0(2)), 0.5 log I0(20), sqrt(exp(9)), direct series sum
@pytest.mark.parametrize("seq, r, expected", [
    (EXP, 1.0, 1.509829560690897079),
    (FP, 1.5, 90.01713130052181355),
    (ML, 3.0, 3526.588267161586870),
])
def test_sigma_matches_oracle(seq, r, expected):
    assert sigma(seq, r) == pytest.approx(expected, rel=1e-13)


def test_log_sigma_large_radius():
    assert log_sigma(EXP, 10.0) == pytest.approx(8.794805214122137145, rel=1e-14)
    big = 0.5 * float(mp.log(mp.besseli(0, 2 * 300)))
    assert log_sigma(EXP, 300.0) == pytest.approx(big, rel=1e-13)


@pytest.mark.parametrize("r, expected", [(2.0, 1.727045222049101166), (20.0, 19.74839682672701317)])
def test_log_sigma_derivative_bessel_ratio(r, expected):
    # r I1(2r) / I0(2r)
    assert log_sigma_derivative(EXP, r) == pytest.approx(expected, rel=1e-12)


def test_explicit_sigma_trivial():
    z = CoefficientSequence.explicit([0, 1])
    assert sigma(z, 5.0) == pytest.approx(5.0, rel=1e-15)
    assert log_max_modulus(z.coefficients(1), 5.0) == pytest.approx(math.log(5.0), rel=1e-14)


def test_truncation_degree_known_values():
    assert truncation_degree(EXP, 1.0) == 14
    assert truncation_degree(EXP, 20.0) == 60
    assert truncation_degree(EXP, 40.0) == 93
    assert truncation_degree(CoefficientSequence.explicit([1, 2, 3]), 100.0) == 2


def test_truncation_failure_past_max_degree():
    with pytest.raises(TruncationFailure):
        truncation_degree(EXP, 1e4, TruncationPolicy(max_degree=64))


def test_extra_terms_change_little():
    for seq in (EXP, FP, ML):
        for r in (0.5, 3.0, 12.0):
            n = truncation_degree(seq, r)
            j = np.arange(n + 11)
            lt = 2.0 * (seq.log_abs(j) + j * math.log(r))
            full = 0.5 * (lt.max() + math.log(math.fsum(np.exp(lt - lt.max()))))
            assert abs(math.expm1(full - log_sigma(seq, r))) < 10 * 1e-12


@pytest.mark.parametrize("coeffs, r, expected", [
    ([0, 0, 0, 1], 3.0, 27.0),
    ([1, 0, -1], 2.0, 5.0),
])
def test_max_modulus_polynomials(coeffs, r, expected):
    assert max_modulus(coeffs, r) == pytest.approx(expected, rel=1e-12)


def test_max_modulus_exponential():
    c = EXP.coefficients(truncation_degree(EXP, 3.0))
    assert log_max_modulus(c, 3.0) == pytest.approx(3.0, rel=1e-12)


@pytest.mark.parametrize("seq", BASES, ids=lambda s: s.base_id)
def test_sigma_below_max_modulus(seq):
    for r in (0.3, 1.0, 2.5, 6.0):
        c = seq.coefficients(truncation_degree(seq, r))
        assert log_sigma(seq, r) <= log_max_modulus(c, r) + 1e-8


def test_star_transform_matches_termwise_scaling():
    vals = [0.5, -1.0, 2.0, 0.25j, 3.0]
    starred = star_transform(CoefficientSequence.explicit(vals))
    assert starred.values == tuple(complex(j * v) for j, v in enumerate(vals))
    n = truncation_degree(EXP, 4.0) + 5
    manual = CoefficientSequence.explicit(np.arange(n + 1) * EXP.coefficients(n))
    assert sigma(star_transform(EXP), 4.0) == pytest.approx(sigma(manual, 4.0), rel=1e-12)


def test_coefficient_values():
    assert coefficient(EXP, 5) == pytest.approx(1 / 120)
    assert coefficient(FP, 3) == pytest.approx(8 / math.sqrt(6))
    assert coefficient(ML, 2) == pytest.approx(1.0)
    assert coefficient(CoefficientSequence.explicit([1, 2]), 7) == 0


@pytest.mark.parametrize("text", [
    "exponential", "factorial_power:c=2.0,s=0.5", "mittag_leffler:rho=2.0", "explicit:0.0,1.0",
    "exponential:star=1", "explicit:1.0,2.0;scale=3.0",
])
def test_base_id_round_trip(text):
    seq = parse_base_id(text)
    assert parse_base_id(format_base_id(seq)) == seq
    assert CoefficientSequence.from_dict(seq.to_dict()) == seq


@pytest.mark.parametrize("text", ["bessel", "factorial_power:c=-1,s=1", "explicit:0,0", "exponential:q=1",
                                  "mittag_leffler:rho"])
def test_bad_base_ids_rejected(text):
    with pytest.raises(ConfigError):
        parse_base_id(text)


def test_scaled_poly_normalises():
    b, top = scaled_poly([1.0, 0.0, 4.0], 3.0)
    assert np.max(np.abs(b)) == 1.0
    assert top == pytest.approx(math.log(36.0))
    w = np.array([1.0, 1j, -0.5])
    assert np.allclose(horner(b, w) * math.exp(top), 1 + 36.0 * w ** 2)


@given(st.sampled_from(BASES), radii, factors)
def test_sigma_strictly_increasing(seq, r, factor):
    assert log_sigma(seq, r * factor) > log_sigma(seq, r)


@given(st.sampled_from(BASES), radii, st.floats(1.0, 2.5))
def test_truncation_monotone(seq, r, factor):
    assert truncation_degree(seq, r * factor) >= truncation_degree(seq, r)


@given(st.sampled_from(BASES), st.floats(0.2, 8.0))
def test_derivative_matches_finite_difference(seq, r):
    h = 1e-4
    fd = (log_sigma(seq, r * math.exp(h)) - log_sigma(seq, r * math.exp(-h))) / (2 * h)
    assert log_sigma_derivative(seq, r) == pytest.approx(fd, rel=1e-6, abs=1e-9)


@given(st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False), min_size=2,
                max_size=12).filter(lambda v: any(v[1:])), st.floats(0.1, 5.0))
def test_star_sigma_equals_termwise_list(vals, r):
    starred = star_transform(CoefficientSequence.explicit(vals))
    manual = math.sqrt(math.fsum(abs(j * v) ** 2 * r ** (2 * j) for j, v in enumerate(vals)))
    assert sigma(starred, r) == pytest.approx(manual, rel=1e-12)
