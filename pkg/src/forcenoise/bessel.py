"""Modified Bessel functions of the second kind, orders 0 and 1.

Two regimes:

* ``x <= 2``: ascending series
  K1(x) = 1/x + ln(x/2) I1(x) - (x/4) sum_k [psi(k+1) + psi(k+2)] (x^2/4)^k / (k! (k+1)!)
  (and the analogous series for K0);
* ``x > 2``: Steed's continued-fraction evaluation of K0 and K1 together
  (Temme's CF2), which converges quickly for large arguments and is
  accurate to a few ulp.

Results underflow to zero for ``x`` beyond ~745.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ParameterError

EULER_GAMMA = 0.57721566490153286061
_SERIES_MAX = 2.0
_EPS = 1e-17


def _series_k0_k1(x: float):
    y = 0.25 * x * x
    lg = math.log(0.5 * x)
    # psi(k+1) = -gamma + H_k
    term = 1.0  # y^k / (k!)^2 for K0;  y^k / (k! (k+1)!) for K1 derived below
    H = 0.0
    i0 = 0.0
    s0 = 0.0
    i1 = 0.0
    s1 = 0.0
    k = 0
    while True:
        psi1 = -EULER_GAMMA + H  # psi(k+1)
        H_next = H + 1.0 / (k + 1)
        psi2 = -EULER_GAMMA + H_next  # psi(k+2)
        t1 = term / (k + 1)  # y^k / (k! (k+1)!)
        i0 += term
        s0 += term * psi1
        i1 += t1
        s1 += t1 * (psi1 + psi2)
        k += 1
        term *= y / (k * k)
        H = H_next
        if term < _EPS * i0 and k > 2:
            break
    K0 = -lg * i0 + s0
    K1 = 1.0 / x + lg * (0.5 * x) * i1 - 0.25 * x * s1
    return K0, K1


def _cf_k0_k1(x: float):
    # Steed / Temme CF2 for order mu = 0
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = delh = d
    q1, q2 = 0.0, 1.0
    a1 = 0.25
    q = c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, 20000):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels / s) < _EPS:
            break
    else:  # pragma: no cover - convergence is fast for x > 2
        raise ArithmeticError("continued fraction for K0/K1 did not converge")
    h = a1 * h
    K0 = math.sqrt(math.pi / (2.0 * x)) * math.exp(-x) / s
    K1 = K0 * (x + 0.5 - h) / x
    return K0, K1


def _k01_scalar(x: float):
    if not x > 0:
        raise ParameterError(f"modified Bessel K needs x > 0, got {x!r}")
    if x <= _SERIES_MAX:
        return _series_k0_k1(x)
    if x > 745.0:
        return 0.0, 0.0
    return _cf_k0_k1(x)


def _vectorize(fn, x):
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        return fn(float(arr))
    out = np.empty(arr.shape)
    for idx, v in np.ndenumerate(arr):
        out[idx] = fn(float(v))
    return out


def bessel_k0(x):
    """K0(x) for x > 0 (scalar or array)."""
    return _vectorize(lambda v: _k01_scalar(v)[0], x)


def bessel_k1(x):
    """K1(x) for x > 0 (scalar or array); relative accuracy ~1e-15."""
    return _vectorize(lambda v: _k01_scalar(v)[1], x)


def x_k1(x):
    """x K1(x), extended continuously to 1 at x = 0."""
    arr = np.asarray(x, dtype=float)

    def f(v):
        if v == 0.0:
            return 1.0
        return v * _k01_scalar(v)[1]

    return _vectorize(f, arr)
