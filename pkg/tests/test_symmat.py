import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from vsdp.symmat import SymMat, eig_sym, is_feasible, jacobi_eigh, lambda_min

from conftest import random_feasible, random_zero_diag


def test_symmat_storage_is_exactly_symmetric():
    a = np.arange(9.0).reshape(3, 3)
    m = SymMat(a)
    assert np.array_equal(m.data, m.data.T)
    # the upper triangle wins
    assert m.data[1, 0] == a[0, 1]
    with pytest.raises(ValueError):
        m.data[0, 0] = 5.0


@pytest.mark.parametrize("bad", [np.zeros((0, 0)), np.zeros((2, 3)), np.zeros(3)])
def test_symmat_rejects_non_square(bad):
    with pytest.raises(ValueError):
        SymMat(bad)


@pytest.mark.parametrize("method", ["lapack", "jacobi"])
def test_identity_eigenvalues(method):
    e = eig_sym(np.eye(3), method)
    assert np.allclose(e.eigenvalues, 1.0)
    assert np.allclose(e.eigenvectors.T @ e.eigenvectors, np.eye(3))


@pytest.mark.parametrize("method", ["lapack", "jacobi"])
def test_two_by_two_swap(method):
    e = eig_sym(np.array([[0.0, 1.0], [1.0, 0.0]]), method)
    assert np.allclose(e.eigenvalues, [-1.0, 1.0])
    s = 1 / np.sqrt(2)
    assert np.isclose(abs(e.eigenvectors[:, 0] @ np.array([s, -s])), 1.0)
    assert np.isclose(abs(e.eigenvectors[:, 1] @ np.array([s, s])), 1.0)


@pytest.mark.parametrize("method", ["lapack", "jacobi"])
def test_reconstruction_six_by_six(rng, method):
    A = rng.standard_normal((6, 6))
    M = A + A.T
    e = eig_sym(M, method)
    assert np.linalg.norm(e.reconstruct() - M) <= 1e-10 * np.linalg.norm(M)


def test_non_finite_rejected():
    M = np.eye(3)
    M[0, 1] = M[1, 0] = np.nan
    for method in ("lapack", "jacobi"):
        with pytest.raises(ValueError):
            eig_sym(M, method)
    with pytest.raises(ValueError):
        eig_sym(np.eye(2), "qr")


def test_jacobi_matches_lapack(rng):
    for _ in range(100):
        n = int(rng.integers(1, 13))
        A = rng.standard_normal((n, n)) * 10 ** rng.uniform(-3, 3)
        M = A + A.T
        wj, _ = jacobi_eigh(M)
        wl = np.linalg.eigvalsh(M)
        assert np.allclose(wj, wl, rtol=0, atol=1e-11 * max(1.0, np.linalg.norm(M)))


def test_jacobi_is_deterministic(rng):
    A = rng.standard_normal((9, 9))
    M = A + A.T
    w1, v1 = jacobi_eigh(M)
    w2, v2 = jacobi_eigh(M)
    assert np.array_equal(w1, w2) and np.array_equal(v1, v2)


def test_jacobi_sweep_cap():
    A = np.random.default_rng(0).standard_normal((8, 8))
    with pytest.raises(RuntimeError):
        jacobi_eigh(A + A.T, max_sweeps=1)


def test_jacobi_handles_degenerate_spectrum():
    # repeated eigenvalue 2 with a two-dimensional eigenspace
    Q, _ = np.linalg.qr(np.random.default_rng(1).standard_normal((4, 4)))
    M = Q @ np.diag([2.0, 2.0, -1.0, 5.0]) @ Q.T
    w, v = jacobi_eigh(M)
    assert np.allclose(w, [-1.0, 2.0, 2.0, 5.0])
    assert np.allclose((v * w) @ v.T, M, atol=1e-12)


sym_matrices = st.integers(1, 8).flatmap(
    lambda n: arrays(np.float64, (n, n), elements=st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False))
).map(lambda a: a + a.T)


@settings(max_examples=150, deadline=None)
@given(sym_matrices)
def test_eig_invariants_property(M):
    n = M.shape[0]
    for method in ("lapack", "jacobi"):
        e = eig_sym(M, method)
        assert np.all(np.diff(e.eigenvalues) >= 0)
        assert np.linalg.norm(e.reconstruct() - M) <= 1e-10 * max(1.0, np.linalg.norm(M))
        assert np.linalg.norm(e.eigenvectors.T @ e.eigenvectors - np.eye(n)) <= 1e-10 * n
    assert lambda_min(M) == eig_sym(M).eigenvalues[0]


def test_lambda_min_examples(rng):
    assert lambda_min(np.zeros((4, 4))) == 0.0
    assert np.isclose(lambda_min(np.array([[0, -1.5], [-1.5, 0]])), -1.5)
    A = rng.standard_normal((11, 11))
    M = A + A.T
    assert lambda_min(M) == eig_sym(M).eigenvalues[0]
    assert np.isclose(lambda_min(M, "jacobi"), lambda_min(M), atol=1e-11)


def test_is_feasible_examples():
    assert is_feasible(np.zeros((3, 3)))
    assert is_feasible(np.array([[0.0, -1.0], [-1.0, 0.0]]), 1e-9)
    assert not is_feasible(np.array([[0.0, -1.5], [-1.5, 0.0]]))
    assert not is_feasible(np.array([[1e-6, 0.0], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        is_feasible(np.zeros((2, 2)), -1.0)


def _psd_by_pivots(M, tol=1e-9):
    """Symmetric Gaussian elimination with diagonal pivoting; PSD iff no pivot < -tol."""
    a = np.array(M, dtype=float)
    n = a.shape[0]
    for k in range(n):
        j = k + int(np.argmax(np.diag(a)[k:]))
        a[[k, j]] = a[[j, k]]
        a[:, [k, j]] = a[:, [j, k]]
        piv = a[k, k]
        if piv < -tol:
            return False
        if piv <= tol:
            # a zero pivot on a PSD matrix forces a zero row
            if np.any(np.abs(a[k, k + 1:]) > 1e-7):
                return False
            continue
        a[k + 1:, k + 1:] -= np.outer(a[k + 1:, k], a[k, k + 1:]) / piv
    return True


def test_feasibility_matches_pivot_test():
    rng = np.random.default_rng(7)
    agree = 0
    for i in range(500):
        n = int(rng.integers(2, 13))
        if i % 2:
            X = random_feasible(rng, n) * rng.uniform(0.5, 1.5)
        else:
            X = random_zero_diag(rng, n, scale=rng.uniform(0.05, 0.6))
        np.fill_diagonal(X, 0.0)
        # stay away from the boundary where two tolerances can disagree
        if abs(lambda_min(X) + 1) < 1e-6:
            continue
        assert is_feasible(X, 1e-9) == _psd_by_pivots(np.eye(n) + X)
        agree += 1
    assert agree > 450


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 12), st.integers(0, 2**32 - 1), st.floats(0.0, 1.0))
def test_convex_combination_stays_feasible(n, seed, beta):
    rng = np.random.default_rng(seed)
    X1, X2 = random_feasible(rng, n), random_feasible(rng, n)
    assert is_feasible(beta * X1 + (1 - beta) * X2, 1e-9)
