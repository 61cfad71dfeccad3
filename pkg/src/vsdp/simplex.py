"""Two-phase tableau simplex for small dense standard-form LPs.

    minimize (or maximize) c @ x   subject to   A @ x == b,  x >= 0

Dantzig pricing with a switch to Bland's rule once a run of degenerate
pivots suggests cycling. A previously optimal basis can be passed back in
(``basis=``) after appending columns; phase 1 is then skipped whenever that
basis is still primal feasible.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-11
FEAS_TOL = 1e-9
DEGENERATE_STREAK = 30


class LPError(Exception):
    pass


class LPInfeasible(LPError):
    pass


class LPUnbounded(LPError):
    pass


class LPIterationLimit(LPError):
    pass


@dataclass
class LPResult:
    x: np.ndarray
    value: float
    # Dual multipliers: for a minimization A.T @ duals <= c, for a
    # maximization A.T @ duals >= c; b @ duals == value at the optimum.
    duals: np.ndarray
    basis: np.ndarray
    iterations: int


def _pivot(t: np.ndarray, row: int, col: int) -> None:
    t[row] /= t[row, col]
    f = t[:, col].copy()
    f[row] = 0.0
    t -= np.outer(f, t[row])


def _run(t: np.ndarray, basis: np.ndarray, ncols: int, max_iter: int) -> int:
    """Minimise over the tableau whose last row holds reduced costs.

    Columns ``>= ncols`` (besides the rhs) are never allowed to enter.
    """
    m = t.shape[0] - 1
    it = 0
    streak = 0
    while True:
        rc = t[m, :ncols]
        scale = max(1.0, float(np.max(np.abs(rc))))
        neg = np.flatnonzero(rc < -PIVOT_TOL * scale)
        if neg.size == 0:
            return it
        if it >= max_iter:
            raise LPIterationLimit(f"simplex exceeded {max_iter} pivots")
        col = int(neg[0]) if streak >= DEGENERATE_STREAK else int(neg[np.argmin(rc[neg])])
        a = t[:m, col]
        pos = np.flatnonzero(a > PIVOT_TOL)
        if pos.size == 0:
            raise LPUnbounded("objective unbounded along an improving column")
        ratios = t[pos, -1] / a[pos]
        best = ratios.min()
        ties = pos[ratios <= best + 1e-12 * max(1.0, abs(best))]
        # smallest basic index among ties (Bland's leaving rule)
        row = int(ties[np.argmin(basis[ties])])
        streak = streak + 1 if best <= FEAS_TOL else 0
        _pivot(t, row, col)
        basis[row] = col
        it += 1


def simplex(c, A, b, *, maximize: bool = False, basis=None, max_iter: int = 5000) -> LPResult:
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if c.shape != (n,) or b.shape != (m,):
        raise ValueError("inconsistent LP dimensions")
    cost = -c if maximize else c
    iters = 0

    t = None
    if basis is not None:
        basis = np.array(basis, dtype=int)
        try:
            B = A[:, basis]
            t_body = np.linalg.solve(B, np.column_stack([A, b]))
        except np.linalg.LinAlgError:
            t_body = None
        if t_body is not None and np.all(t_body[:, -1] >= -FEAS_TOL):
            t = np.vstack([t_body, np.zeros(n + 1)])
            t[:m, -1] = np.maximum(t[:m, -1], 0.0)

    if t is None:
        # phase 1 on the artificial-augmented problem
        sign = np.where(b < 0, -1.0, 1.0)
        As = A * sign[:, None]
        bs = b * sign
        t = np.zeros((m + 1, n + m + 1))
        t[:m, :n] = As
        t[:m, n:n + m] = np.eye(m)
        t[:m, -1] = bs
        t[m, :n] = -As.sum(axis=0)
        t[m, -1] = -bs.sum()
        basis = np.arange(n, n + m)
        iters += _run(t, basis, n, max_iter)
        if -t[m, -1] > FEAS_TOL * max(1.0, float(np.abs(bs).sum())):
            raise LPInfeasible(f"phase 1 residual {-t[m, -1]:.3e}")
        # drive remaining artificials out; drop rows that turn out redundant
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if basis[r] >= n:
                cand = np.flatnonzero(np.abs(t[r, :n]) > 1e-9)
                if cand.size:
                    _pivot(t, r, int(cand[0]))
                    basis[r] = int(cand[0])
                else:
                    keep[r] = False
        rows = np.flatnonzero(keep)
        t = np.vstack([t[rows][:, list(range(n)) + [n + m]], np.zeros(n + 1)])
        basis = basis[rows]
        m = rows.size
        A_used = A[rows]
    else:
        A_used = A

    # phase 2 reduced costs: c_j - c_B B^-1 a_j
    cb = cost[basis]
    t[m, :n] = cost - cb @ t[:m, :n]
    t[m, -1] = -cb @ t[:m, -1]
    iters += _run(t, basis, n, max_iter)

    x = np.zeros(n)
    x[basis] = t[:m, -1]
    value = float(cost @ x)
    duals_used = np.linalg.solve(A_used[:, basis].T, cost[basis])
    if A_used is A:
        duals = duals_used
    else:
        duals = np.zeros(A.shape[0])
        duals[rows] = duals_used
    if maximize:
        value, duals = -value, -duals
    return LPResult(x=x, value=value, duals=duals, basis=basis.copy(), iterations=iters)
