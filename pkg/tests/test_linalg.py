"""Batched LU with pivoting, equilibration and refined solves."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from forcenoise.errors import SingularMatrixError
from forcenoise.linalg import (
    EXT_COMPLEX,
    complex_solve,
    equilibrate,
    inverse,
    lu_factor,
    lu_solve,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(re=arrays(float, (5, 5), elements=finite), im=arrays(float, (5, 5), elements=finite),
       b=arrays(float, (5,), elements=finite))
def test_lu_matches_numpy_solve(re, im, b):
    A = re + 1j * im + 50 * np.eye(5)  # keep away from singular draws
    if np.linalg.cond(A) > 1e8:
        return
    x = lu_solve(lu_factor(A), b)
    ref = np.linalg.solve(A, b.astype(complex))
    assert np.allclose(x, ref, rtol=1e-9, atol=1e-12 * np.abs(ref).max())


def test_batched_matches_loop():
    rng = np.random.default_rng(7)
    A = rng.normal(size=(8, 6, 6)) + 1j * rng.normal(size=(8, 6, 6))
    B = rng.normal(size=(8, 6, 2)) + 0j
    X = lu_solve(lu_factor(A), B)
    for k in range(8):
        assert np.allclose(X[k], np.linalg.solve(A[k], B[k]), rtol=1e-10)


def test_pivoting_needed():
    A = np.array([[0.0, 1.0], [1.0, 0.0]])
    x = lu_solve(lu_factor(A), np.array([2.0, 3.0]))
    assert np.allclose(x, [3.0, 2.0])


def test_singular_detected():
    A = np.array([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(SingularMatrixError):
        lu_factor(A)
    with pytest.raises(ValueError):
        lu_factor(np.zeros((2, 3)))


def test_equilibrate_powers_of_two():
    A = np.diag([1e30, 1.0, 1e-30]) + 1e-40
    r, c = equilibrate(A)
    assert np.all(np.log2(r) == np.round(np.log2(r)))
    S = np.abs(A) * r[:, None] * c[None, :]
    assert np.all((S.max(axis=1) > 0.25) & (S.max(axis=1) < 4))


def test_badly_scaled_solve_is_accurate():
    """Entries spanning 50 orders of magnitude: equilibrated solve is exact-ish."""
    D = np.diag([1e25, 1.0, 1e-25])
    Q = np.array([[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]])
    A = D @ Q @ D
    x_true = np.array([1e-25, 1.0, 1e25])
    b = A @ x_true
    sol = complex_solve(A, b)
    assert np.allclose(sol.x, x_true, rtol=1e-12)
    assert sol.residual < 1e-15
    assert sol.cond < 1e3


@pytest.mark.skipif(np.finfo(np.longdouble).eps >= 1e-16,
                    reason="long double is not wider than float64 here")
def test_extended_precision_refinement_recovers_digits():
    """``1 + 2^-30 + 2^-55`` rounds in float64; refinement against the
    extended-precision matrix restores the solution ``(1/d, -1/d)``."""
    d = np.longdouble(2.0) ** -30 + np.longdouble(2.0) ** -55
    Ae = np.array([[1 + d, 1], [1, 1]], dtype=EXT_COMPLEX)
    A = Ae.astype(complex)
    b = np.array([1.0, 0.0])
    exact = 1.0 / (2.0 ** -30 + 2.0 ** -55)  # correctly rounded 1/d
    plain = complex_solve(A, b, M_ext=Ae, refine=0).x[0].real
    refined = complex_solve(A, b, M_ext=Ae, refine=2).x[0].real
    assert abs(plain / exact - 1) > 1e-8
    assert abs(refined / exact - 1) < 1e-14


def test_inverse_identity():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    inv = inverse(A).x
    assert np.allclose(A @ inv, np.eye(6), atol=1e-12)
