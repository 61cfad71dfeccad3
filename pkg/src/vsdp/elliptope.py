"""Primal-dual interior point for linear optimisation over the elliptope.

    minimize  G . Y   s.t.  diag(Y) = 1,  Y PSD
    maximize  -sum(lam)   s.t.  G + diag(lam) PSD

This pair is the linear-minimisation oracle of the Frank-Wolfe solver and is
called once per outer iteration on an n x n gradient with n around 11. At
that size numpy's per-call overhead dominates, so the Newton loop is
compiled with numba.
"""
from __future__ import annotations

import numpy as np
from numba import njit

STEP_DAMPING = 0.98  # fraction of the distance to the PSD boundary
DEFAULT_REL_GAP = 1e-12
DEFAULT_MAX_ITER = 80


@njit(cache=True)
def _cholesky(M):
    """Lower Cholesky factor; ok=False when M is not numerically positive definite."""
    n = M.shape[0]
    L = np.zeros((n, n))
    for j in range(n):
        s = M[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if not s > 0.0:
            return L, False
        L[j, j] = np.sqrt(s)
        for i in range(j + 1, n):
            t = M[i, j]
            for k in range(j):
                t -= L[i, k] * L[j, k]
            L[i, j] = t / L[j, j]
    return L, True


@njit(cache=True)
def _lower_inverse(L):
    n = L.shape[0]
    Li = np.zeros((n, n))
    for j in range(n):
        Li[j, j] = 1.0 / L[j, j]
        for i in range(j + 1, n):
            t = 0.0
            for k in range(j, i):
                t -= L[i, k] * Li[k, j]
            Li[i, j] = t / L[i, i]
    return Li


@njit(cache=True)
def _max_step(M, D, damping):
    """Largest step in (0, 1] keeping M + a D positive definite, or -1 if M is not."""
    L, ok = _cholesky(M)
    if not ok:
        return -1.0
    Li = _lower_inverse(L)
    W = Li @ D @ Li.T
    W = 0.5 * (W + W.T)
    w = np.linalg.eigvalsh(W)[0]
    if w >= 0.0:
        return 1.0
    return min(1.0, damping / -w)


@njit(cache=True)
def _ipm(G, rel_gap, max_iter, damping):
    n = G.shape[0]
    Y = np.eye(n)
    rows = np.zeros(n)
    for i in range(n):
        for j in range(n):
            rows[i] += abs(G[i, j])
    lam = np.zeros(n)
    if rows.max() == 0.0:
        return Y, lam, 0
    # strictly diagonally dominant start, scaled with G
    lam = 1.1 * rows + rows.max()
    Z = G + np.diag(lam)
    mu = np.sum(Z * Y) / (2 * n)
    target = rel_gap * np.sum(np.abs(G))
    it = 0
    while it < max_iter:
        gap = np.sum(lam) + np.sum(G * Y)
        if gap <= target:
            break
        Lz, ok = _cholesky(Z)
        if not ok:
            break
        Lzi = _lower_inverse(Lz)
        Zi = Lzi.T @ Lzi
        Zi = 0.5 * (Zi + Zi.T)
        # Schur complement (Z^-1 o Y) dlam = mu diag(Z^-1) - 1
        S = Zi * Y
        Ls, ok = _cholesky(0.5 * (S + S.T))
        if not ok:
            break
        rhs = mu * np.diag(Zi) - 1.0
        u = np.linalg.solve(Ls, rhs)
        dlam = np.linalg.solve(Ls.T, u)
        dY = mu * Zi - Y - (Zi * dlam) @ Y
        dY = 0.5 * (dY + dY.T)
        ap = _max_step(Y, dY, damping)
        ad = _max_step(Z, np.diag(dlam), damping)
        if ap < 0.0 or ad < 0.0:
            break
        Y = Y + ap * dY
        lam = lam + ad * dlam
        Z = G + np.diag(lam)
        # aggressive centering after long steps, cautious after short ones
        sigma = 0.1 if min(ap, ad) > 0.9 else 0.5
        mu = sigma * np.sum(Z * Y) / n
        it += 1
    return Y, lam, it


def elliptope_ipm(G, *, rel_gap: float = DEFAULT_REL_GAP, max_iter: int = DEFAULT_MAX_ITER):
    """Solve the primal-dual pair above.

    Returns ``(Y, lam, newton_steps)``. ``G + diag(lam)`` is positive
    definite, ``diag(Y) = 1`` holds at every step, and the remaining gap
    ``sum(lam) + G . Y`` is driven below ``rel_gap * sum|G|``. The problem is
    scale invariant (Y does not change and lam scales with G), so the target
    is purely relative. The iteration is the HKM/HRVW direction with
    adaptive centering; when the iterates become numerically singular the
    last strictly feasible pair is returned.
    """
    G = np.ascontiguousarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError("G must be square")
    Y, lam, it = _ipm(G, float(rel_gap), int(max_iter), STEP_DAMPING)
    return Y, lam, int(it)
