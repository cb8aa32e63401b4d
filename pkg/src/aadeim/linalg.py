"""Dense linear-algebra kernels.

Matrices are plain ``numpy.ndarray`` objects of dtype float64 stored in
row-major (C) order. The routines here are thin, checked wrappers around
LAPACK via numpy/scipy.
"""

import warnings

import numpy as np
import scipy.linalg as sla
from scipy.linalg.lapack import dgecon

from .errors import NonFiniteError, SingularMatrixError

PINV_RTOL = 1e-12
COND_LIMIT = 1e12


def _lu(A):
    # singularity is reported through the condition estimate instead
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        return sla.lu_factor(A, check_finite=False)


def check_finite(A, name="matrix"):
    """Raise :class:`NonFiniteError` naming the first non-finite entry of `A`."""
    A = np.asarray(A, dtype=float)
    mask = ~np.isfinite(A)
    if mask.any():
        idx = tuple(int(i) for i in np.argwhere(mask)[0])
        raise NonFiniteError(f"{name} has non-finite entry {A[idx]!r} at index {idx}")
    return A


def thin_svd(A):
    """Economy SVD ``A = U @ diag(s) @ V.T``.

    Returns
    -------
    U : (M, k) ndarray
    s : (k,) ndarray, descending and nonnegative
    V : (N, k) ndarray
        Right singular vectors as columns (not transposed).
    """
    A = check_finite(A, "thin_svd input")
    if A.size == 0:
        M, N = A.shape
        k = min(M, N)
        return np.zeros((M, k)), np.zeros(k), np.zeros((N, k))
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    return U, s, Vt.T


def pivoted_qr(A):
    """Column order chosen by Householder QR with column pivoting.

    Pivots are picked greedily by largest remaining column norm. LAPACK's
    ``geqp3`` takes the first maximum, so exact ties resolve to the lowest
    column index.
    """
    A = check_finite(A, "pivoted_qr input")
    _, piv = sla.qr(A, mode="r", pivoting=True)
    return np.asarray(piv, dtype=np.intp)


def condition_estimate(A):
    """Cheap 1-norm condition number estimate from an LU factorization."""
    A = np.asarray(A, dtype=float)
    lu, _ = _lu(A)
    anorm = np.abs(A).sum(axis=0).max()
    if anorm == 0.0:
        return np.inf
    rcond, info = dgecon(lu, anorm, norm="1")
    if info != 0 or rcond == 0.0:
        return np.inf
    return 1.0 / rcond


def solve_linear(A, B, context="solve_linear"):
    """Solve ``A X = B`` for square `A`, refusing near-singular systems.

    Raises
    ------
    SingularMatrixError
        If the estimated condition number exceeds ``COND_LIMIT``.
    """
    A = check_finite(A, f"{context} matrix")
    B = check_finite(B, f"{context} right-hand side")
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"{context}: expected a square matrix, got shape {A.shape}")
    lu, piv = _lu(A)
    anorm = np.abs(A).sum(axis=0).max() if A.size else 0.0
    rcond, info = dgecon(lu, anorm, norm="1") if A.size else (1.0, 0)
    if info != 0 or rcond * COND_LIMIT < 1.0 or not np.isfinite(lu).all():
        cond = np.inf if rcond == 0.0 else 1.0 / rcond
        raise SingularMatrixError(context, cond)
    return sla.lu_solve((lu, piv), B, check_finite=False)


def pseudo_inverse(A, rtol=PINV_RTOL):
    """Moore-Penrose pseudo-inverse via :func:`thin_svd`.

    Singular values below ``rtol * s_max`` are treated as zero.
    """
    U, s, V = thin_svd(A)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros(np.asarray(A).shape[::-1])
    keep = s > rtol * s[0]
    return (V[:, keep] / s[keep]) @ U[:, keep].T


def orthonormalize(A):
    """QR-based orthonormal basis of the columns of `A`.

    Column signs are fixed so that the triangular factor has a nonnegative
    diagonal, which keeps the basis orientation stable across small updates.
    """
    Q, R = np.linalg.qr(A)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs
