"""Small dense complex linear algebra, batched over a leading frequency axis.

The drift matrices handled here are 6x6 with entries spanning ~35 orders of
magnitude (couplings of order 1e24 next to hbar*G of order 1e-10), and some
entries are sums such as ``k + T_v**2 / L`` where the small part matters.
Two measures keep the solves accurate:

* the LU factorisation uses partial pivoting and works on a whole stack of
  matrices at once (one per frequency);
* :func:`complex_solve` can refine the double-precision solution with
  residuals evaluated in extended precision against an extended-precision
  copy of the matrix, which recovers the digits lost when such sums are
  rounded to float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularMatrixError

EXT_REAL = np.longdouble
EXT_COMPLEX = np.clongdouble


@dataclass
class LUFactor:
    lu: np.ndarray  # (..., n, n) packed unit-lower / upper factors
    perm: np.ndarray  # (..., n) row permutation: P A = L U with (P A)[i] = A[perm[i]]

    @property
    def n(self):
        return self.lu.shape[-1]


def lu_factor(A, rtol: float | None = None) -> LUFactor:
    """LU factorisation with partial pivoting of one or many square matrices.

    Parameters
    ----------
    A : array_like, shape (..., n, n)
    rtol : pivots with ``|p| <= rtol * max|A|`` are treated as zero;
        defaults to the float64 machine epsilon.  The test is only
        meaningful for reasonably scaled matrices, see :func:`equilibrate`.

    Raises
    ------
    SingularMatrixError
        carrying the smallest offending pivot magnitude.
    """
    a = np.array(A, dtype=complex, copy=True)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError("lu_factor needs square matrices")
    squeeze = a.ndim == 2
    if squeeze:
        a = a[None]
    batch_shape = a.shape[:-2]
    n = a.shape[-1]
    a = a.reshape((-1, n, n))
    nb = a.shape[0]
    perm = np.tile(np.arange(n), (nb, 1))
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    scale = np.max(np.abs(a), axis=(1, 2))
    tol = (np.finfo(float).eps if rtol is None else rtol) * scale
    rows = np.arange(nb)
    for k in range(n):
        p = k + np.argmax(np.abs(a[:, k:, k]), axis=1)
        if np.any(p != k):
            rk = a[rows, k].copy()
            a[rows, k] = a[rows, p]
            a[rows, p] = rk
            pk = perm[rows, k].copy()
            perm[rows, k] = perm[rows, p]
            perm[rows, p] = pk
        piv = a[:, k, k]
        bad = np.abs(piv) <= tol
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise SingularMatrixError(
                f"matrix is singular to working precision (pivot {abs(piv[i]):.3e} "
                f"at step {k}, batch index {i})", pivot=float(abs(piv[i])), index=i)
        if k + 1 < n:
            a[:, k + 1:, k] /= piv[:, None]
            a[:, k + 1:, k + 1:] -= a[:, k + 1:, k, None] * a[:, k, None, k + 1:]
    lu = a.reshape(batch_shape + (n, n))
    perm = perm.reshape(batch_shape + (n,))
    if squeeze:
        lu, perm = lu[0], perm[0]
    return LUFactor(lu, perm)


def lu_solve(fac: LUFactor, B) -> np.ndarray:
    """Solve ``A X = B`` given ``fac = lu_factor(A)``; ``B`` is (..., n, k) or (..., n)."""
    lu, perm = fac.lu, fac.perm
    n = fac.n
    B = np.asarray(B, dtype=complex)
    vec = B.ndim == lu.ndim - 1
    if vec:
        B = B[..., None]
    B = np.broadcast_to(B, lu.shape[:-2] + B.shape[-2:])
    x = np.take_along_axis(B, perm[..., None], axis=-2).copy()
    for i in range(1, n):  # forward substitution, unit lower
        x[..., i, :] -= np.einsum("...j,...jk->...k", lu[..., i, :i], x[..., :i, :])
    for i in range(n - 1, -1, -1):  # back substitution
        if i + 1 < n:
            x[..., i, :] -= np.einsum("...j,...jk->...k", lu[..., i, i + 1:], x[..., i + 1:, :])
        x[..., i, :] /= lu[..., i, i, None]
    return x[..., 0] if vec else x


def equilibrate(A, sweeps: int = 12):
    """Row and column scalings ``r, c`` (powers of two) with ``diag(r) A diag(c)``
    having every row and column maximum close to one (Ruiz iteration).

    Powers of two make the scaling exact in binary floating point.
    """
    absA = np.abs(np.asarray(A))
    shp = absA.shape[:-1]
    r = np.ones(shp)
    c = np.ones(absA.shape[:-2] + absA.shape[-1:])
    for _ in range(sweeps):
        S = absA * r[..., :, None] * c[..., None, :]
        rm = np.max(S, axis=-1)
        cm = np.max(S, axis=-2)
        rm = np.where(rm > 0, rm, 1.0)
        cm = np.where(cm > 0, cm, 1.0)
        r = r * np.exp2(np.round(-0.5 * np.log2(rm)))
        c = c * np.exp2(np.round(-0.5 * np.log2(cm)))
    return r, c


@dataclass
class Solution:
    x: np.ndarray
    cond: np.ndarray  # infinity-norm condition-number estimate per matrix
    residual: np.ndarray  # normwise backward error ||R|| / (||M|| ||X|| + ||B||), equilibrated
    refinements: int = 0


def _inf_norm(A):
    return np.max(np.sum(np.abs(A), axis=-1), axis=-1)


def complex_solve(M, B, M_ext=None, refine: int = 2) -> Solution:
    """Solve ``M X = B`` by LU with partial pivoting plus iterative refinement.

    The system is first equilibrated (:func:`equilibrate`); the singularity
    test and the reported condition number refer to the equilibrated matrix,
    which is what governs the attainable accuracy.

    Parameters
    ----------
    M : (..., n, n) complex
    B : (..., n, k) or (..., n) complex
    M_ext : optional extended-precision (``np.clongdouble``) version of ``M``
        against which residuals are evaluated; when omitted, ``M`` itself is
        promoted.
    refine : number of refinement sweeps.

    Returns
    -------
    Solution
        with the solution, the infinity-norm condition number of the
        equilibrated matrix and the normwise backward error
        ``||B - M X|| / (||M|| ||X|| + ||B||)`` of the returned solution
        (residual in extended precision, equilibrated norms).  Mixed physical
        units make an unscaled residual norm meaningless, hence this choice.
    """
    M = np.asarray(M, dtype=complex)
    Bc = np.asarray(B, dtype=complex)
    vec = Bc.ndim == M.ndim - 1
    r, c = equilibrate(M)
    Ms = M * r[..., :, None] * c[..., None, :]
    fac = lu_factor(Ms)
    Bs = Bc * (r if vec else r[..., :, None])
    # Work with the scaled unknowns Y = X / c throughout.
    A_ext = (np.asarray(M, dtype=EXT_COMPLEX) if M_ext is None
             else np.asarray(M_ext, dtype=EXT_COMPLEX))
    A_ext = A_ext * r.astype(EXT_REAL)[..., :, None] * c.astype(EXT_REAL)[..., None, :]
    B_ext = np.asarray(Bs, dtype=EXT_COMPLEX)
    X = lu_solve(fac, Bs)

    def resid(X):
        Xe = X.astype(EXT_COMPLEX)
        if vec:
            return B_ext - np.einsum("...ij,...j->...i", A_ext, Xe)
        return B_ext - A_ext @ Xe

    Xe = X.astype(EXT_COMPLEX)
    done = 0
    for _ in range(refine):
        R = resid(Xe)
        Xe = Xe + lu_solve(fac, R.astype(complex)).astype(EXT_COMPLEX)
        done += 1
    Y = Xe.astype(complex)
    X = Y * (c if vec else c[..., :, None])
    # normwise backward error of the returned (float64) solution, evaluated in
    # extended precision on the equilibrated system
    R = resid(Y)
    Yn = Y if not vec else Y[..., None]
    Rn = R if not vec else R[..., None]
    Bn = B_ext if not vec else B_ext[..., None]
    rnorm = _inf_norm(Rn).astype(float)
    denom = (_inf_norm(A_ext) * _inf_norm(Yn) + _inf_norm(Bn)).astype(float)
    eye = np.broadcast_to(np.eye(M.shape[-1], dtype=complex), M.shape)
    cond = _inf_norm(Ms) * _inf_norm(lu_solve(fac, eye))
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(denom > 0, rnorm / denom, rnorm)
    return Solution(X, cond, rel, done)


def inverse(M, M_ext=None, refine: int = 2) -> Solution:
    """Matrix inverse via :func:`complex_solve` with ``B = I``."""
    M = np.asarray(M, dtype=complex)
    eye = np.broadcast_to(np.eye(M.shape[-1], dtype=complex), M.shape)
    return complex_solve(M, eye, M_ext=M_ext, refine=refine)
