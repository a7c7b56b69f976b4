from math import e, factorial

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad, quad_vec
from scipy.linalg import expm as scipy_expm

from expkrylov.errors import DimensionMismatchError, MatrixOverflowError, SingularMatrixError
from expkrylov.linalg import expm, lu_solve, phi_matrices, phi_matrix, phi_via_augmented


def taylor_expm(A, terms=60):
    out = np.eye(A.shape[0])
    term = np.eye(A.shape[0])
    for n in range(1, terms):
        term = term @ A / n
        out = out + term
    return out


def phi_quadrature(k, Z):
    """phi_k(Z) = 1/(k-1)! int_0^1 exp((1-t) Z) t^(k-1) dt."""
    val, _ = quad_vec(lambda t: scipy_expm((1 - t) * Z) * t ** (k - 1), 0.0, 1.0, epsabs=1e-14,
                      epsrel=1e-13)
    return val / factorial(k - 1)


def random_matrix(seed, n, norm1):
    A = np.random.default_rng(seed).standard_normal((n, n))
    return A * (norm1 / np.linalg.norm(A, 1))


def test_lu_solve_identity_and_diagonal():
    assert np.allclose(lu_solve(np.eye(3), [1.0, 2.0, 3.0]), [1, 2, 3])
    assert np.allclose(lu_solve([[2.0, 0.0], [0.0, 4.0]], [2.0, 8.0]), [1, 2])


def test_lu_solve_recovers_known_solution():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((6, 6)) + 6 * np.eye(6)
    x = rng.standard_normal(6)
    assert np.linalg.norm(lu_solve(A, A @ x) - x) <= 1e-10 * np.linalg.norm(x)


def test_lu_solve_singular_and_shape_errors():
    with pytest.raises(SingularMatrixError):
        lu_solve([[1.0, 2.0], [2.0, 4.0]], [1.0, 1.0])
    with pytest.raises(SingularMatrixError):
        lu_solve(np.zeros((2, 2)), [1.0, 1.0])
    with pytest.raises(DimensionMismatchError):
        lu_solve(np.eye(2), [1.0, 2.0, 3.0])
    with pytest.raises(DimensionMismatchError):
        lu_solve(np.ones((2, 3)), [1.0, 2.0])


def test_expm_trivial_cases():
    assert np.array_equal(expm(np.zeros((3, 3))), np.eye(3))
    assert np.allclose(expm([[0.0, 1.0], [0.0, 0.0]]), [[1, 1], [0, 1]], atol=1e-15)
    assert abs(expm([[1.0]])[0, 0] - e) <= 1e-12 * e


@pytest.mark.parametrize("seed", range(5))
def test_expm_against_taylor_series(seed):
    A = random_matrix(seed, 6, 2.0)
    ref = taylor_expm(A)
    assert np.linalg.norm(expm(A) - ref) <= 1e-12 * np.linalg.norm(ref)


def test_expm_large_norm_against_squared_taylor():
    A = random_matrix(11, 5, 100.0)
    ref = np.linalg.matrix_power(taylor_expm(A / 256), 256)
    assert np.linalg.norm(expm(A) - ref) <= 1e-9 * np.linalg.norm(ref)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_expm_inverse_property(seed):
    A = random_matrix(seed, 8, 5.0)
    assert np.allclose(expm(A) @ expm(-A), np.eye(8), atol=1e-10)


def test_expm_overflow():
    with pytest.raises(MatrixOverflowError):
        expm([[1000.0]])


def test_phi_at_zero():
    assert np.array_equal(phi_matrix(1, np.zeros((2, 2))), np.eye(2))
    assert np.allclose(phi_matrix(3, np.zeros((2, 2))), np.eye(2) / 6, rtol=0, atol=1e-17)


def test_phi1_scalar_against_quadrature():
    val, _ = quad(lambda t: np.exp(1 - t), 0, 1, epsabs=1e-15)
    assert abs(phi_matrix(1, [[1.0]])[0, 0] - val) <= 1e-12
    assert abs(val - (e - 1)) <= 1e-14


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_phi_matrix_against_quadrature(k):
    Z = random_matrix(k, 4, 3.0)
    ref = phi_quadrature(k, Z)
    assert np.linalg.norm(phi_matrix(k, Z) - ref) <= 1e-11 * np.linalg.norm(ref)


def test_phi_small_norm_is_accurate():
    Z = random_matrix(5, 3, 1e-9)
    # phi_1(Z) = I + Z/2 + O(Z^2)
    assert np.allclose(phi_matrix(1, Z), np.eye(3) + Z / 2, rtol=0, atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 10.0), st.integers(1, 4))
def test_phi_recurrence(seed, norm1, k):
    Z = random_matrix(seed, 5, norm1)
    phis = phi_matrices(k + 1, Z)
    resid = Z @ phis[k] - (phis[k - 1] - np.eye(5) / factorial(k))
    assert np.linalg.norm(resid) <= 1e-10


def test_phi_via_augmented_trivial():
    v1, v2 = phi_via_augmented(np.zeros((3, 3)), np.array([1.0, 0, 0]), 2)
    assert np.allclose(v1, [1, 0, 0]) and np.allclose(v2, [0.5, 0, 0])
    (w,) = phi_via_augmented(np.array([[1.0]]), np.array([1.0]), 1)
    assert abs(w[0] - (e - 1)) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 3.0))
def test_phi_via_augmented_matches_phi_matrix(seed, scale):
    rng = np.random.default_rng(seed)
    H = rng.standard_normal((5, 5))
    v = rng.standard_normal(5)
    got = phi_via_augmented(H, v, 3, scale)
    for k in range(1, 4):
        ref = phi_matrix(k, scale * H) @ v
        assert np.linalg.norm(got[k - 1] - ref) <= 1e-11 * max(1.0, np.linalg.norm(ref))


def test_phi_argument_errors():
    with pytest.raises(ValueError):
        phi_matrix(0, np.eye(2))
    with pytest.raises(DimensionMismatchError):
        phi_via_augmented(np.eye(2), np.ones(3), 1)
    with pytest.raises(ValueError):
        phi_via_augmented(np.eye(2), np.ones(2), 1, scale=0.0)
