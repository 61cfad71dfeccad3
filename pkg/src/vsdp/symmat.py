"""Dense symmetric matrices: storage, eigendecomposition, feasibility tests.

Problem sizes here are tiny (n around 11), so everything is dense numpy.
Two eigensolvers are available: a cyclic Jacobi routine written out in full
and LAPACK's ``eigh``. The solver hot loop uses LAPACK; the Jacobi routine is
the reference implementation and is cross-checked against it in the tests.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


class SymMat:
    """Immutable real symmetric matrix.

    Built from the upper triangle of the input, so ``data[i, j] == data[j, i]``
    holds bit-for-bit.
    """

    __slots__ = ("data",)

    def __init__(self, a):
        a = np.array(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError(f"expected a non-empty square matrix, got shape {a.shape}")
        upper = np.triu(a)
        data = upper + np.triu(a, 1).T
        data.setflags(write=False)
        self.data = data

    @property
    def n(self) -> int:
        return self.data.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def __repr__(self):
        return f"SymMat(n={self.n})"

    @classmethod
    def zeros(cls, n: int) -> "SymMat":
        return cls(np.zeros((n, n)))

    @classmethod
    def identity(cls, n: int) -> "SymMat":
        return cls(np.eye(n))


@dataclass(frozen=True)
class EigDecomp:
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # column i pairs with eigenvalues[i]

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T


def _as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def jacobi_eigh(m, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Rotations visit the upper triangle in row-major order. Iteration stops
    when the off-diagonal Frobenius mass drops below ``tol * ||M||_F`` (or
    below ``tol`` for matrices with tiny norm).

    Returns ``(eigenvalues, eigenvectors)`` sorted ascending.
    """
    a = _as_matrix(m).copy()
    n = a.shape[0]
    v = np.eye(n)
    scale = max(1.0, np.linalg.norm(a))
    mask = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        off = np.linalg.norm(a[mask])
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(diff) + 100.0 * abs(apq) == abs(diff):
                    # theta^2 would overflow; tan of the rotation angle ~ apq / diff
                    t = apq / diff
                else:
                    theta = diff / (2.0 * apq)
                    t = 1.0 if theta == 0.0 else np.sign(theta) / (abs(theta) + np.hypot(theta, 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J with J the (p, q) Givens rotation
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        off = np.linalg.norm(a[mask])
        if off > tol * scale:
            raise RuntimeError(f"Jacobi did not converge in {max_sweeps} sweeps (off={off:.3e})")
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def eig_sym(m, method: str = "lapack") -> EigDecomp:
    """Eigendecomposition with eigenvalues ascending.

    ``method`` is ``"lapack"`` (numpy ``eigh``) or ``"jacobi"``.
    """
    a = _as_matrix(m)
    if method == "lapack":
        w, v = np.linalg.eigh(a)
    elif method == "jacobi":
        w, v = jacobi_eigh(a)
    else:
        raise ValueError(f"unknown eigensolver {method!r}")
    return EigDecomp(w, v)


def lambda_min(m, method: str = "lapack") -> float:
    # same code path as eig_sym so the two agree bit for bit
    return float(eig_sym(m, method).eigenvalues[0])


def is_feasible(x, tol: float = 1e-9) -> bool:
    """True iff ``x`` has zero diagonal and ``x + I`` is PSD, both within ``tol``."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    a = _as_matrix(x)
    if np.any(np.abs(np.diag(a)) > tol):
        return False
    return lambda_min(a) >= -1.0 - tol


def offdiag(a: np.ndarray) -> np.ndarray:
    """Copy of ``a`` with the diagonal zeroed."""
    out = np.array(a, dtype=float)
    np.fill_diagonal(out, 0.0)
    return out


def inner(a, b) -> float:
    """Trace inner product ``tr(A^T B)``."""
    return float(np.vdot(np.asarray(a, dtype=float), np.asarray(b, dtype=float)))
