from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
import mpmath

from kdvtbc.series import (LaurentSeries, binomial_coeffs, binomial_series, constant,
                           mobius_series, series_div, series_power)

GAMMAS = [Fraction(1, 3), Fraction(-1, 3), Fraction(2, 3), Fraction(-2, 3), Fraction(1, 2), -1, -2, -3]


@pytest.mark.parametrize("gamma", GAMMAS)
def test_binomial_matches_direct_evaluation(gamma):
    g = mpmath.mpf(gamma.numerator) / gamma.denominator if isinstance(gamma, Fraction) else gamma
    expected = np.array([float(mpmath.binomial(g, p)) for p in range(60)])
    assert np.allclose(binomial_coeffs(gamma, 59), expected, rtol=1e-12, atol=0)


def test_binomial_examples():
    assert binomial_series(Fraction(1, 3), "-", 5)[0] == 1
    assert binomial_series(Fraction(1, 3), "+", 5)[0] == 1
    assert binomial_series(Fraction(1, 3), "-", 5)[1] == pytest.approx(-1 / 3)
    assert binomial_series(Fraction(-1, 3), "+", 5)[1] == pytest.approx(-1 / 3)
    assert np.allclose(binomial_series(-1, "+", 10).real, (-1.0) ** np.arange(11))


@pytest.mark.parametrize("gamma", GAMMAS)
@pytest.mark.parametrize("sign", ["+", "-"])
def test_binomial_evaluates_function(gamma, sign):
    s = binomial_series(gamma, sign, 200)
    for z in 2 * np.exp(1j * np.linspace(0.1, 6, 5)):
        x = 1 / z
        exact = (1 + x) ** float(gamma) if sign == "+" else (1 - x) ** float(gamma)
        assert abs(s(z) - exact) < 1e-7


def test_mobius_series_evaluates_p():
    s = mobius_series(200)
    s13 = mobius_series(200, Fraction(1, 3))
    for z in 2 * np.exp(1j * np.linspace(0.2, 6, 5)):
        p = (z - 1) / (z + 1)
        assert abs(s(z) - p) < 1e-12
        assert abs(s13(z) - p ** (1 / 3)) < 1e-7


def test_arithmetic():
    a = LaurentSeries([1, 2, 3])
    b = LaurentSeries([1, -1, 0])
    assert np.allclose((a * b).coeffs, [1, 1, 1])
    assert np.allclose((a + 1).coeffs, [2, 2, 3])
    assert np.allclose((1 - a).coeffs, [0, -2, -3])
    assert np.allclose(a.shifted(1).coeffs, [0, 1, 2])
    assert np.allclose(a.times_one_plus_x().coeffs, [1, 3, 5])
    assert np.allclose(series_div(a * b, b).coeffs, a.coeffs)
    assert np.allclose(constant(3, 2).coeffs, [3, 0, 0])


def test_series_is_immutable():
    a = LaurentSeries([1.0, 2.0])
    with pytest.raises(ValueError):
        a.coeffs[0] = 5


def test_rejects_non_finite():
    with pytest.raises(ValueError):
        LaurentSeries([1.0, np.inf])


@given(st.lists(st.floats(-2, 2), min_size=2, max_size=30),
       st.sampled_from([0.5, 1 / 3, -1 / 3, 2 / 3, -2.0]))
def test_power_matches_repeated_product(tail, gamma):
    g = LaurentSeries([1.0] + tail)
    f = series_power(g, gamma)
    # check f ** (1/gamma) == g by comparing f**k and g**m for rational gamma = m/k
    frac = Fraction(gamma).limit_denominator(6)
    lhs = constant(1.0, g.N)
    for _ in range(frac.denominator):
        lhs = lhs * f
    rhs = constant(1.0, g.N)
    base = g if frac.numerator > 0 else series_div(constant(1.0, g.N), g)
    for _ in range(abs(frac.numerator)):
        rhs = rhs * base
    scale = max(1.0, np.max(np.abs(rhs.coeffs)))
    assert np.max(np.abs(lhs.coeffs - rhs.coeffs)) <= 1e-8 * scale


def test_power_branch_choice():
    g = constant(-8.0, 4)
    assert series_power(g, Fraction(1, 3))[0] == pytest.approx((-8 + 0j) ** (1 / 3))
    assert series_power(g, Fraction(1, 3), lead=-2.0)[0] == -2.0
