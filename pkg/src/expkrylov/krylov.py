"""Arnoldi bases and the Krylov approximation of the Jacobian.

The approximate Jacobian is ``A = V H V^T`` where ``V`` spans
``span{b, J b, ..., J^{m-1} b}``.  It is never assembled; every product
goes through ``V`` and ``H``.
"""
from dataclasses import dataclass
from math import factorial

import numpy as np

from .errors import DimensionMismatchError, ZeroVectorError
from .linalg import phi_matrix

REORTH_KAPPA = 0.25
BREAKDOWN_RTOL = 1e-12


@dataclass(frozen=True)
class KrylovBasis:
    """Orthonormal basis ``V`` (N x m), Hessenberg ``H`` (m x m) and breakdown info.

    ``residual`` is the subdiagonal entry ``h_{m+1,m}`` the iteration would
    have produced next; ``breakdown`` is set when it fell under the
    happy-breakdown threshold and the basis was truncated.
    """

    V: np.ndarray
    H: np.ndarray
    beta: float
    residual: float
    breakdown: bool

    @property
    def m(self):
        return self.H.shape[0]

    @property
    def N(self):
        return self.V.shape[0]

    def project(self, w):
        return self.V.T @ w

    def lift(self, u):
        return self.V @ u


class ArnoldiProcess:
    """Incremental modified Gram-Schmidt Arnoldi.

    Grows one vector at a time so adaptive callers can stop as soon as an
    error estimate is satisfied.  One conditional re-orthogonalization pass
    is made when projection removes more than ``1 - kappa`` of the norm.
    """

    def __init__(self, jvp, b, max_dim, kappa=REORTH_KAPPA, breakdown_rtol=BREAKDOWN_RTOL):
        b = np.asarray(b, dtype=float)
        beta = float(np.linalg.norm(b))
        if beta == 0.0:
            raise ZeroVectorError("cannot build a Krylov space from the zero vector")
        if max_dim < 1:
            raise ValueError("Krylov dimension must be >= 1")
        self.jvp = jvp
        self.beta = beta
        self.max_dim = max_dim
        self.kappa = kappa
        self.tol = breakdown_rtol * beta
        n = b.shape[0]
        self._V = np.zeros((n, max_dim + 1))
        self._V[:, 0] = b / beta
        self._H = np.zeros((max_dim + 1, max_dim))
        self.m = 0
        self.breakdown = False
        self.jv_products = 0

    def step(self):
        """Add one basis vector; returns False once no more can be added."""
        if self.breakdown or self.m >= self.max_dim:
            return False
        j = self.m
        V, H = self._V, self._H
        w = np.asarray(self.jvp(V[:, j]), dtype=float)
        self.jv_products += 1
        if w.shape != V[:, j].shape:
            raise DimensionMismatchError("jvp returned a vector of the wrong length")
        before = np.linalg.norm(w)
        for i in range(j + 1):
            H[i, j] = V[:, i] @ w
            w = w - H[i, j] * V[:, i]
        after = np.linalg.norm(w)
        if after < self.kappa * before:
            for i in range(j + 1):
                c = V[:, i] @ w
                H[i, j] += c
                w = w - c * V[:, i]
            after = np.linalg.norm(w)
        H[j + 1, j] = after
        self.m = j + 1
        if after < self.tol:
            self.breakdown = True
        else:
            V[:, j + 1] = w / after
        return True

    @property
    def residual(self):
        return self._H[self.m, self.m - 1] if self.m else np.inf

    def basis(self):
        m = self.m
        return KrylovBasis(
            V=self._V[:, :m].copy(),
            H=self._H[:m, :m].copy(),
            beta=self.beta,
            residual=float(self._H[m, m - 1]),
            breakdown=self.breakdown,
        )


def arnoldi(jvp, b, M):
    """Build an ``M``-dimensional (or smaller, on breakdown) Krylov basis."""
    proc = ArnoldiProcess(jvp, b, M)
    while proc.step():
        pass
    return proc.basis()


def _check_len(basis, v):
    v = np.asarray(v, dtype=float)
    if v.shape != (basis.N,):
        raise DimensionMismatchError(f"vector shape {v.shape} != ({basis.N},)")
    return v


def apply_approx_jacobian(basis, v):
    """``V H V^T v``."""
    v = _check_len(basis, v)
    return basis.V @ (basis.H @ (basis.V.T @ v))


def reduced_phi_apply(basis, k, scale, w):
    """``phi_k(scale * V H V^T) w`` using only m x m matrix functions."""
    w = _check_len(basis, w)
    u = basis.V.T @ w
    perp = w - basis.V @ u
    return perp / factorial(k) + basis.V @ (phi_matrix(k, scale * basis.H) @ u)
