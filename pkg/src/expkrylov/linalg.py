"""Dense kernels for the small reduced matrices.

Everything here works on plain ``numpy`` arrays.  The reduced Hessenberg
matrices never grow beyond a few hundred rows, so dense algorithms are
used throughout.
"""
import warnings
from math import factorial

import numpy as np
import scipy.linalg

from .errors import DimensionMismatchError, MatrixOverflowError, SingularMatrixError

PIVOT_RTOL = 1e-14


def _square(A, what="matrix"):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatchError(f"{what} must be square, got shape {A.shape}")
    return A


def lu_solve(A, b):
    """Solve ``A x = b`` with partial-pivoting LU.

    Raises :class:`SingularMatrixError` when a pivot falls below
    ``1e-14 * ||A||_inf``.
    """
    A = _square(A)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != A.shape[0]:
        raise DimensionMismatchError(f"rhs length {b.shape[0]} != {A.shape[0]}")
    with warnings.catch_warnings():
        # exact zero pivots are reported below as SingularMatrixError
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=True)
    scale = np.linalg.norm(A, np.inf)
    pivots = np.abs(np.diag(lu))
    if scale == 0.0 or np.min(pivots) < PIVOT_RTOL * scale:
        raise SingularMatrixError("matrix is singular to working precision")
    return scipy.linalg.lu_solve((lu, piv), b)


def expm(A):
    """Matrix exponential by scaling and squaring with a diagonal Pade approximant."""
    A = _square(A)
    with np.errstate(over="ignore", invalid="ignore"):
        E = scipy.linalg.expm(A)
    if not np.all(np.isfinite(E)):
        raise MatrixOverflowError("matrix exponential overflowed")
    return E


def phi_matrices(k_max, Z):
    """Return ``[phi_1(Z), ..., phi_{k_max}(Z)]`` from one exponential.

    Uses the block upper-triangular matrix with ``Z`` in the leading block
    and identities on the first block superdiagonal; block ``(0, j)`` of its
    exponential is ``phi_j(Z)``.
    """
    Z = _square(Z)
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    m = Z.shape[0]
    n = (k_max + 1) * m
    W = np.zeros((n, n))
    W[:m, :m] = Z
    eye = np.eye(m)
    for j in range(k_max):
        W[j * m:(j + 1) * m, (j + 1) * m:(j + 2) * m] = eye
    E = expm(W)
    return [E[:m, j * m:(j + 1) * m].copy() for j in range(1, k_max + 1)]


def phi_matrix(k, Z):
    """phi_k(Z) for ``k >= 1``; phi_k(0) = I/k!."""
    if k < 1:
        raise ValueError("phi_matrix needs k >= 1")
    Z = _square(Z)
    if not np.any(Z):
        return np.eye(Z.shape[0]) / factorial(k)
    return phi_matrices(k, Z)[-1]


def phi_via_augmented(H, v, k_max, scale=1.0):
    """``[phi_1(scale*H) v, ..., phi_{k_max}(scale*H) v]`` from one expm.

    The augmented matrix is ``[[scale*H, v e_1^T], [0, N]]`` with ``N`` the
    ``k_max x k_max`` upper shift; column ``M + j - 1`` of its exponential
    holds ``phi_j(scale*H) v`` in its first ``M`` rows.
    """
    H = _square(H)
    v = np.asarray(v, dtype=float)
    m = H.shape[0]
    if v.shape != (m,):
        raise DimensionMismatchError(f"vector length {v.shape} != {m}")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if not scale > 0:
        raise ValueError("scale must be positive")
    n = m + k_max
    W = np.zeros((n, n))
    W[:m, :m] = scale * H
    W[:m, m] = v
    for j in range(k_max - 1):
        W[m + j, m + j + 1] = 1.0
    E = expm(W)
    return [E[:m, m + j].copy() for j in range(k_max)]
