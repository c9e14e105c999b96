"""Modified Bessel functions K0, K1 against independent oracles."""

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from forcenoise.bessel import bessel_k0, bessel_k1, x_k1


def _k_integral(nu_order, x):
    """K_n(x) = int_0^inf exp(-x cosh t) cosh(n t) dt, by adaptive quadrature."""
    # the integrand is below 1e-300 once x cosh t > 690
    t_max = math.acosh(max(1.0, 700.0 / x))
    val, _ = integrate.quad(lambda t: math.exp(-x * math.cosh(t)) * math.cosh(nu_order * t),
                            0.0, t_max, epsabs=0.0, epsrel=1e-13, limit=400)
    return val


X_GRID = np.geomspace(1e-3, 30.0, 41)


@pytest.mark.parametrize("x", X_GRID)
def test_k1_matches_integral_representation(x):
    assert float(bessel_k1(x)) == pytest.approx(_k_integral(1, x), rel=1e-8)


@pytest.mark.parametrize("x", X_GRID[::4])
def test_k0_matches_integral_representation(x):
    assert float(bessel_k0(x)) == pytest.approx(_k_integral(0, x), rel=1e-8)


@settings(max_examples=60, deadline=None)
@given(x=st.floats(1e-6, 700.0))
def test_against_arbitrary_precision(x):
    mp.mp.dps = 30
    assert float(bessel_k1(x)) == pytest.approx(float(mp.besselk(1, x)), rel=1e-13)
    assert float(bessel_k0(x)) == pytest.approx(float(mp.besselk(0, x)), rel=1e-13)


@pytest.mark.parametrize("x", [0.01, 0.5, 1.9, 2.1, 7.0, 25.0])
def test_derivative_recurrence(x):
    """K1' = -(K0 + K2)/2 with K2 = K0 + 2 K1/x, i.e. K1' = -K0 - K1/x."""
    h = 1e-5 * x
    fd = (float(bessel_k1(x + h)) - float(bessel_k1(x - h))) / (2 * h)
    rhs = -float(bessel_k0(x)) - float(bessel_k1(x)) / x
    assert fd == pytest.approx(rhs, rel=1e-8)


def test_series_and_continued_fraction_join_smoothly():
    """Both algorithms are accurate right at the switch-over point x = 2."""
    mp.mp.dps = 30
    for x in (2.0 - 1e-12, 2.0, 2.0 + 1e-12, np.nextafter(2.0, 3.0)):
        assert float(bessel_k1(x)) == pytest.approx(float(mp.besselk(1, x)), rel=2e-15)
        assert float(bessel_k0(x)) == pytest.approx(float(mp.besselk(0, x)), rel=2e-15)


def test_x_k1_limit_and_vectorisation():
    assert float(x_k1(0.0)) == 1.0
    assert float(x_k1(1e-8)) == pytest.approx(1.0, abs=1e-14)
    arr = x_k1(np.array([[0.0, 1.0], [2.0, 3.0]]))
    assert arr.shape == (2, 2)
    assert arr[1, 1] == pytest.approx(3.0 * float(mp.besselk(1, 3.0)), rel=1e-14)


def test_domain():
    with pytest.raises(ValueError):
        bessel_k1(0.0)
    with pytest.raises(ValueError):
        bessel_k0(-1.0)
