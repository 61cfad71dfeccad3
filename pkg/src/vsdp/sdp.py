"""Approximate SDP solver over the unit-diagonal elliptope.

The problem is

    minimize f(X)  s.t.  X symmetric, diag(X) = 0, X + I PSD,

i.e. the usual unit-diagonal SDP written in the shifted variable X = U - I.
Each iteration linearises f, solves the small dual problem

    minimize sum(lam)  s.t.  grad f(X) + diag(lam) PSD

with an interior-point method (cutting planes are available as an
alternative), and moves toward the PSD matrix sum_i y_i v_i v_i^T
assembled from the dual certificate (a Frank-Wolfe step). The dual value
gives the duality gap g(X) = X . grad f(X) + sum(lam), which upper-bounds
the suboptimality and serves as the stopping test.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .elliptope import elliptope_ipm
from .simplex import LPError, simplex
from .symmat import inner, is_feasible

DUAL_PSD_TOL = 1e-8
DUAL_MAX_ROUNDS = 200
DEFAULT_MAX_ITER = 300


class SolverError(RuntimeError):
    pass


class DualConvergenceError(SolverError):
    """Cutting-plane loop hit its round cap; carries the best λ found."""

    def __init__(self, msg, lam, min_eig):
        super().__init__(msg)
        self.lam = lam
        self.min_eig = min_eig


class InfeasibleStartError(SolverError, ValueError):
    pass


class DescentViolation(SolverError):
    pass


@dataclass
class ObjectiveSpec:
    """Convex objective on zero-diagonal symmetric matrices.

    ``grad`` must return a symmetric matrix with zero diagonal. ``quad``, when
    present, marks the objective as quadratic: ``quad(D)`` is the exact
    second-order coefficient of ``t -> f(X + t D)``, which enables exact line
    search.
    """

    dim: int
    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    curvature_bound: float
    quad: Optional[Callable[[np.ndarray], float]] = None


def sum_of_squares(c, L) -> ObjectiveSpec:
    """f(X) = sum_m (c_m - L_m . X)^2 for symmetric matrices L_m.

    Only the off-diagonal part of each L_m matters on the feasible set, so the
    diagonal is dropped up front. The declared curvature bound is
    sum_m ||L_m||_F^2 * 4 n (n - 1): feasible points have entries in [-1, 1],
    so any segment direction has squared Frobenius norm at most 4 n (n - 1).
    """
    c = np.asarray(c, dtype=float)
    L = np.asarray(L, dtype=float)
    if L.ndim != 3 or L.shape[1] != L.shape[2] or L.shape[0] != c.shape[0]:
        raise ValueError("L must have shape (M, n, n) matching c")
    n = L.shape[1]
    L = 0.5 * (L + L.transpose(0, 2, 1))
    idx = np.arange(n)
    L[:, idx, idx] = 0.0
    Lf = L.reshape(L.shape[0], n * n)
    cf = float(np.sum(Lf * Lf) * 4 * n * (n - 1))

    def value(X):
        r = c - Lf @ np.asarray(X, dtype=float).ravel()
        return float(r @ r)

    def grad(X):
        r = c - Lf @ np.asarray(X, dtype=float).ravel()
        return (-2.0 * (r @ Lf)).reshape(n, n)

    def quad(D):
        s = Lf @ np.asarray(D, dtype=float).ravel()
        return float(s @ s)

    obj = ObjectiveSpec(dim=n, value=value, grad=grad, curvature_bound=cf, quad=quad)
    obj.offsets = c
    obj.linear_maps = L
    return obj


@dataclass
class DualCertificate:
    lam: np.ndarray  # diagonal of the optimal λ
    vectors: np.ndarray  # (n, |T|) unit columns v_i, i in the active set
    alphas: np.ndarray  # v_i^T G v_i
    weights: np.ndarray  # y_i >= 0
    min_eig: float  # λ_min(G + diag(lam)) at termination
    rounds: int = 0

    @property
    def value(self) -> float:
        return float(np.sum(self.lam))

    def psd_part(self) -> np.ndarray:
        """sum_i y_i v_i v_i^T, which has unit diagonal."""
        v = self.vectors
        return (v * self.weights) @ v.T

    def check(self, G, psd_tol=1e-7, tol=1e-6) -> dict:
        """Residuals of the four certificate conditions; raise nothing."""
        G = np.asarray(G, dtype=float)
        S = G + np.diag(self.lam)
        v = self.vectors
        return {
            "psd": float(np.linalg.eigvalsh(S)[0]),
            "complementarity": float(np.max(np.abs(np.einsum("ki,kl,li->i", v, S, v)), initial=0.0)),
            "normalization": float(np.max(np.abs((v * v) @ self.weights - 1.0))),
            "trace": float(abs(self.value + self.weights @ self.alphas)),
        }


def _trivial_certificate(n: int, G: np.ndarray) -> DualCertificate:
    e = np.eye(n)
    return DualCertificate(
        lam=np.zeros(n), vectors=e, alphas=np.diag(G).copy(),
        weights=np.ones(n), min_eig=float(np.linalg.eigvalsh(G)[0]), rounds=0,
    )


def dual_subproblem(G, *, method: str = "interior_point", **kw) -> DualCertificate:
    """Minimise sum(lam) subject to G + diag(lam) PSD; return a KKT certificate.

    ``method`` selects ``"interior_point"`` (default) or ``"cutting_plane"``.
    """
    if method == "interior_point":
        return dual_interior_point(G, **kw)
    if method == "cutting_plane":
        return dual_cutting_plane(G, **kw)
    raise ValueError(f"unknown dual method {method!r}")


def _check_gradient(G) -> np.ndarray:
    G = np.asarray(G, dtype=float)
    n = G.shape[0]
    if G.ndim != 2 or G.shape != (n, n) or not np.all(np.isfinite(G)):
        raise ValueError("G must be a finite square matrix")
    scale = max(1.0, float(np.max(np.abs(G))))
    if np.max(np.abs(np.diag(G))) > 1e-12 * scale:
        raise ValueError("G must have zero diagonal")
    return G


def dual_interior_point(G, *, active_tol: float = 1e-7, warm_vectors=None) -> DualCertificate:
    """Certificate from an interior-point solve of the dual pair.

    lam comes straight from the dual iterate, so G + diag(lam) is positive
    definite. The primal iterate Y (unit diagonal, PSD) is split by
    eigendecomposition, Y = sum_i mu_i u_i u_i^T; eigenpairs with mu_i above
    ``active_tol * max(mu)`` form the active set, with weights y_i = mu_i.
    ``warm_vectors`` is accepted for interface symmetry and ignored.
    """
    G = _check_gradient(G)
    n = G.shape[0]
    if not np.any(G):
        return _trivial_certificate(n, G)
    Y, lam, steps = elliptope_ipm(G)
    mu, U = np.linalg.eigh(Y)
    keep = mu > active_tol * max(1.0, mu[-1])
    V = U[:, keep]
    return DualCertificate(
        lam=lam, vectors=V, alphas=np.einsum("ki,kl,li->i", V, G, V),
        weights=mu[keep], min_eig=float(np.linalg.eigvalsh(G + np.diag(lam))[0]), rounds=steps,
    )


def dual_cutting_plane(G, *, tol: float = DUAL_PSD_TOL, max_rounds: int = DUAL_MAX_ROUNDS,
                       warm_vectors=None, seed_after: Optional[int] = None) -> DualCertificate:
    """Minimise sum(lam) subject to G + diag(lam) PSD, with a KKT certificate.

    Cutting planes: every unit vector v yields the valid linear constraint
    sum_k v_k^2 lam_k >= -v^T G v. We solve the LP over the current cut set
    in its dual form

        maximise  sum_i y_i (-v_i^T G v_i)   s.t.  sum_i y_i v_i**2 = 1, y >= 0,

    whose multipliers are lam and whose basic solution is the weight vector y.
    Eigenvectors of G + diag(lam) with eigenvalue below ``-tol`` are added
    as new cuts until none remain. Plain cutting planes crawl near the
    optimum; with ``seed_after`` set, the eigenvectors of an interior-point
    primal solution are added once after that many rounds.
    """
    G = _check_gradient(G)
    n = G.shape[0]
    w, V = np.linalg.eigh(G)
    if w[0] >= -tol:
        return _trivial_certificate(n, G)

    cuts = V
    basis = None
    if warm_vectors is not None:
        warm_vectors = np.asarray(warm_vectors, dtype=float)
        cuts = np.hstack([warm_vectors, V])
        if warm_vectors.shape[1] == n:
            basis = np.arange(n)
    ones = np.ones(n)
    lam = np.zeros(n)
    min_eig = float(w[0])
    seeded = False
    for rnd in range(1, max_rounds + 1):
        alphas = np.einsum("ki,kl,li->i", cuts, G, cuts)
        try:
            lp = simplex(-alphas, cuts * cuts, ones, maximize=True, basis=basis)
        except LPError as exc:
            raise DualConvergenceError(f"cut LP failed: {exc}", lam, min_eig) from exc
        lam = lp.duals
        basis = lp.basis
        w, V = np.linalg.eigh(G + np.diag(lam))
        min_eig = float(w[0])
        if min_eig >= -tol:
            act = lp.basis
            return DualCertificate(
                lam=lam, vectors=cuts[:, act], alphas=alphas[act],
                weights=lp.x[act], min_eig=min_eig, rounds=rnd,
            )
        cuts = np.hstack([cuts, V[:, w < -tol]])
        if not seeded and seed_after is not None and rnd >= seed_after:
            Y, _, _ = elliptope_ipm(G)
            mu, U = np.linalg.eigh(Y)
            cuts = np.hstack([cuts, U[:, mu > 1e-12 * mu[-1]]])
            seeded = True
    raise DualConvergenceError(
        f"cutting planes did not reach PSD within {max_rounds} rounds (min eig {min_eig:.3e})",
        lam, min_eig,
    )


def duality_gap(X, G, cert: DualCertificate) -> float:
    """g(X) = X . G + sum(lam)."""
    X = np.asarray(X, dtype=float)
    G = np.asarray(G, dtype=float)
    if X.shape != G.shape or X.shape[0] != cert.lam.shape[0]:
        raise ValueError("dimension mismatch")
    return inner(X, G) + cert.value


def fw_target(cert: DualCertificate) -> np.ndarray:
    """sum_i y_i v_i v_i^T - I with the diagonal set to exactly zero."""
    Y = cert.psd_part()
    np.fill_diagonal(Y, 0.0)
    return Y


def fw_step(X, cert: DualCertificate, beta: float) -> np.ndarray:
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    X = np.asarray(X, dtype=float)
    out = X + beta * (fw_target(cert) - X)
    out = 0.5 * (out + out.T)
    np.fill_diagonal(out, 0.0)
    return out


def choose_beta(X, direction, objective: ObjectiveSpec, k: int, *, grad=None,
                policy: str = "line_search") -> float:
    """Step size: exact line search for quadratic objectives, else 2/(k+2)."""
    if policy not in ("line_search", "schedule"):
        raise ValueError(f"unknown step policy {policy!r}")
    if policy == "schedule" or objective.quad is None:
        return 2.0 / (k + 2.0)
    if grad is None:
        grad = objective.grad(X)
    slope = inner(grad, direction)
    q = objective.quad(direction)
    if slope >= 0.0:
        return 0.0
    if q <= 0.0:
        return 1.0
    return float(min(1.0, max(0.0, -slope / (2.0 * q))))


@dataclass
class IterRecord:
    k: int
    f: float
    g: float
    beta: float
    lambda_min: float
    ms: float
    dual_rounds: int = 0


@dataclass
class SolveTrace:
    records: list = field(default_factory=list)
    converged: bool = False
    capped: bool = False
    curvature_bound: float = 0.0

    @property
    def iterations(self) -> int:
        """Number of steps taken."""
        return max(0, len(self.records) - 1)

    @property
    def final_gap(self) -> float:
        return self.records[-1].g if self.records else float("nan")

    def dump(self, path) -> None:
        """Tab-separated ``k f g beta lambda_min ms``, one line per iteration."""
        with open(path, "w") as fh:
            for r in self.records:
                fh.write(f"{r.k}\t{r.f:.12g}\t{r.g:.12g}\t{r.beta:.12g}\t{r.lambda_min:.12g}\t{r.ms:.4f}\n")


def solve(obj: ObjectiveSpec, X0=None, gap_tol: Optional[float] = None,
          max_iter: int = DEFAULT_MAX_ITER, *, policy: str = "line_search",
          check_descent: bool = True, trace_path=None, keep_iterates: bool = False,
          dual_method: str = "interior_point"):
    """Run the approximate SDP iteration from a feasible ``X0``.

    Returns ``(X, trace)``. Stops once the duality gap is at most ``gap_tol``
    (default ``1e-3 * max(1, f(X0))``) or after ``max_iter`` steps, in which
    case ``trace.capped`` is set. With ``check_descent`` every step is checked
    against f(X+) <= f(X) - beta g + beta^2 C_f.
    """
    n = obj.dim
    X = np.zeros((n, n)) if X0 is None else np.array(X0, dtype=float)
    if X.shape != (n, n):
        raise ValueError(f"X0 must be {n}x{n}")
    if not np.allclose(X, X.T, rtol=0, atol=1e-12) or not is_feasible(X, 1e-9):
        raise InfeasibleStartError("X0 is not feasible")
    X = 0.5 * (X + X.T)
    np.fill_diagonal(X, 0.0)

    f = obj.value(X)
    if not np.isfinite(f):
        raise SolverError("objective is not finite at X0")
    if gap_tol is None:
        gap_tol = 1e-3 * max(1.0, f)
    if gap_tol <= 0:
        raise ValueError("gap_tol must be positive")

    trace = SolveTrace(curvature_bound=obj.curvature_bound)
    iterates = [] if keep_iterates else None
    warm = None
    cf = obj.curvature_bound
    try:
        for k in range(max_iter + 1):
            t0 = time.perf_counter()
            G = obj.grad(X)
            cert = dual_subproblem(G, method=dual_method, warm_vectors=warm)
            warm = cert.vectors
            g = inner(X, G) + cert.value
            lmin = float(np.linalg.eigvalsh(X)[0])
            rec = IterRecord(k=k, f=f, g=g, beta=0.0, lambda_min=lmin, ms=0.0, dual_rounds=cert.rounds)
            trace.records.append(rec)
            if keep_iterates:
                iterates.append((X.copy(), G, cert))
            if g <= gap_tol:
                trace.converged = True
                rec.ms = 1e3 * (time.perf_counter() - t0)
                break
            if k == max_iter:
                trace.capped = True
                rec.ms = 1e3 * (time.perf_counter() - t0)
                break
            direction = fw_target(cert) - X
            beta = choose_beta(X, direction, obj, k, grad=G, policy=policy)
            Xn = fw_step(X, cert, beta)
            fn = obj.value(Xn)
            if not np.isfinite(fn):
                raise SolverError(f"objective became non-finite at iteration {k + 1}")
            if check_descent and fn > f - beta * g + beta * beta * cf + 1e-8 * max(1.0, abs(f)):
                raise DescentViolation(
                    f"iteration {k}: f+={fn:.6g} exceeds bound {f - beta * g + beta * beta * cf:.6g}"
                )
            rec.beta = beta
            rec.ms = 1e3 * (time.perf_counter() - t0)
            X, f = Xn, fn
    except SolverError as exc:
        exc.X, exc.trace = X, trace
        raise
    if keep_iterates:
        trace.iterates = iterates
    if trace_path is not None:
        trace.dump(trace_path)
    return X, trace
