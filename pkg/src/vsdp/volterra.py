"""Symbol-level second-order Volterra model and the SDP / ML detectors.

A block of Nb differential symbols d is observed through Nr correlator
outputs

    z[m] = (r + P d)^T Q B[m] Q (r + P d) + noise.

Writing x = [1; d] each output is a quadratic form x^T W[m] x, with

    W[m] = [[r^T M r,   r^T M P],
            [P^T M r,   P^T M P]],     M = Q B[m] Q,

so with U = x x^T the residual z[m] - W[m] . U is linear in U. Relaxing
U = x x^T to U PSD with unit diagonal gives a convex least-squares SDP,
solved in the shifted variable X = U - I.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import sdp


def placement(nb: int, npulse: int, code=None):
    """Code-scrambling diagonal ``q``, data placement ``P`` and reference vector ``r``.

    Pulses alternate reference/data inside each symbol, s = (0, 1, 0, 1, ...),
    P = I_nb (x) s and r = 1_nb (x) (1 - s). ``q[k]`` is the running product of
    the amplitude code over the pulses before pulse k.
    """
    if nb < 1 or npulse < 2 or npulse % 2:
        raise ValueError("need nb >= 1 and an even number of pulses per symbol")
    b = np.ones(npulse) if code is None else np.asarray(code, dtype=float)
    if b.shape != (npulse,) or not np.all(np.abs(b) == 1):
        raise ValueError("amplitude code must be a +-1 vector of length npulse")
    s = np.arange(npulse) % 2 == 1
    P = np.kron(np.eye(nb), s.astype(float)[:, None])
    r = np.kron(np.ones(nb), (~s).astype(float))
    code_seq = np.tile(b, nb)
    q = np.concatenate([[1.0], np.cumprod(code_seq)[:-1]])
    return q, P, r


@dataclass(frozen=True)
class VolterraSystem:
    nb: int
    npulse: int
    q: np.ndarray  # diagonal of Q
    P: np.ndarray  # (nb*npulse, nb)
    r: np.ndarray  # (nb*npulse,)
    B: np.ndarray  # (nr, nb*npulse, nb*npulse)
    z: np.ndarray  # (nr,)
    W: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        npl = self.nb * self.npulse
        q = np.asarray(self.q, dtype=float)
        P = np.asarray(self.P, dtype=float)
        r = np.asarray(self.r, dtype=float)
        B = np.asarray(self.B, dtype=float)
        z = np.asarray(self.z, dtype=float)
        if q.shape != (npl,) or not np.all(np.abs(q) == 1):
            raise ValueError("Q must be a +-1 diagonal of size nb*npulse")
        if P.shape != (npl, self.nb) or not np.all((P == 0) | (P == 1)):
            raise ValueError("P must be a 0/1 matrix of shape (nb*npulse, nb)")
        if np.any(P.sum(axis=1) > 1) or np.any(P.sum(axis=0) < 1):
            raise ValueError("P needs at most one nonzero per row and one per column at least")
        if r.shape != (npl,) or not np.all((r == 0) | (r == 1)):
            raise ValueError("r must be a 0/1 vector of length nb*npulse")
        if np.any(P.T @ r != 0):
            raise ValueError("reference and data pulses overlap (P^T r != 0)")
        if B.ndim != 3 or B.shape[1:] != (npl, npl):
            raise ValueError("B must have shape (nr, nb*npulse, nb*npulse)")
        if B.shape[0] < self.nb:
            raise ValueError("need at least nb measurements")
        if not np.allclose(B, B.transpose(0, 2, 1), rtol=1e-12, atol=1e-15):
            raise ValueError("every B[m] must be symmetric")
        if z.shape != (B.shape[0],):
            raise ValueError("z must have one entry per B[m]")
        for name, val in (("q", q), ("P", P), ("r", r), ("B", B), ("z", z)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        M = B * q[None, :, None] * q[None, None, :]
        E = np.column_stack([r, P])  # x = [1; d] -> r + P d = E x
        W = np.einsum("ia,mij,jb->mab", E, M, E)
        W = 0.5 * (W + W.transpose(0, 2, 1))
        W.setflags(write=False)
        object.__setattr__(self, "W", W)

    @property
    def nr(self) -> int:
        return self.B.shape[0]

    def with_z(self, z) -> "VolterraSystem":
        return VolterraSystem(self.nb, self.npulse, self.q, self.P, self.r, self.B, np.asarray(z, dtype=float))


def make_system(nb: int, npulse: int, B, z, code=None) -> VolterraSystem:
    q, P, r = placement(nb, npulse, code)
    return VolterraSystem(nb, npulse, q, P, r, np.asarray(B, dtype=float), np.asarray(z, dtype=float))


def _check_d(sys: VolterraSystem, d) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if d.shape != (sys.nb,):
        raise ValueError(f"expected {sys.nb} symbols, got shape {d.shape}")
    if not np.all(np.abs(d) == 1):
        raise ValueError("symbols must be +-1")
    return d


def predict_z(sys: VolterraSystem, d) -> np.ndarray:
    """Noise-free correlator outputs (r+Pd)^T Q B[m] Q (r+Pd)."""
    d = _check_d(sys, d)
    a = sys.q * (sys.r + sys.P @ d)
    return np.einsum("i,mij,j->m", a, sys.B, a)


def residuals_term_by_term(sys: VolterraSystem, U) -> np.ndarray:
    """Residuals written term by term with d = U[0, 1:], D = U[1:, 1:].

    z - r'Q'BQr - r'Q'BQPd - r'Q'B'QPd - tr(D P'Q'BQP); kept as an
    independent cross-check of the quadratic-form route used by the solver.
    """
    U = np.asarray(U, dtype=float)
    d = U[0, 1:]
    D = U[1:, 1:]
    Q = np.diag(sys.q)
    out = np.empty(sys.nr)
    for m in range(sys.nr):
        Bm = sys.B[m]
        QBQ = Q.T @ Bm @ Q
        out[m] = (sys.z[m] - sys.r @ QBQ @ sys.r - sys.r @ QBQ @ sys.P @ d
                  - sys.r @ Q.T @ Bm.T @ Q @ sys.P @ d
                  - np.trace(D @ sys.P.T @ QBQ @ sys.P))
    return out


def build_objective(sys: VolterraSystem) -> sdp.ObjectiveSpec:
    """Least-squares SDP objective in the solver variable X = U - I.

    Residual m is z[m] - W[m] . (X + I) = (z[m] - tr W[m]) - W[m] . X.
    """
    c = sys.z - np.trace(sys.W, axis1=1, axis2=2)
    return sdp.sum_of_squares(c, sys.W)


def sign(x) -> np.ndarray:
    """+1 for x >= 0, -1 otherwise."""
    return np.where(np.asarray(x) >= 0, 1, -1).astype(int)


@dataclass
class SolverOptions:
    gap_tol: Optional[float] = None  # absolute; overrides gap_rel
    gap_rel: float = 1e-3  # stop once g <= gap_rel * f(X0)
    max_iter: int = sdp.DEFAULT_MAX_ITER
    policy: str = "line_search"
    dual_method: str = "interior_point"
    check_descent: bool = True


@dataclass
class DemodResult:
    d_hat: np.ndarray
    U_final: np.ndarray
    gap: float
    iterations: int
    converged: bool = True
    f_final: float = float("nan")
    decision: str = "first_row"  # or "data_block" when the model has no reference coupling


class DemodError(RuntimeError):
    def __init__(self, msg, partial: Optional[DemodResult] = None):
        super().__init__(msg)
        self.partial = partial


def demodulate_sdp(sys: VolterraSystem, options: Optional[SolverOptions] = None) -> DemodResult:
    """Solve the relaxation from X0 = 0 and threshold the first row of U.

    When the model has no reference coupling at all (every output is even in
    d) the first row is uninformative and the decision falls back to the
    principal eigenvector of the data block; ``decision`` records which rule
    was used.
    """
    opt = options or SolverOptions()
    obj = build_objective(sys)
    n = sys.nb + 1
    X0 = np.zeros((n, n))
    gap_tol = opt.gap_tol
    if gap_tol is None:
        f0 = obj.value(X0)
        gap_tol = opt.gap_rel * f0 if f0 > 0 else 1e-12
    try:
        X, trace = sdp.solve(obj, X0, gap_tol=gap_tol, max_iter=opt.max_iter, policy=opt.policy,
                             check_descent=opt.check_descent, dual_method=opt.dual_method)
    except sdp.SolverError as exc:
        partial = None
        Xp = getattr(exc, "X", None)
        if Xp is not None:
            U = Xp + np.eye(n)
            tr = exc.trace
            d_hat, how = _decide(sys, U)
            partial = DemodResult(d_hat, U, tr.final_gap, tr.iterations, False, obj.value(Xp), how)
        raise DemodError(f"SDP solve failed: {exc}", partial) from exc
    U = X + np.eye(n)
    d_hat, how = _decide(sys, U)
    return DemodResult(d_hat, U, trace.final_gap, trace.iterations,
                       trace.converged, trace.records[-1].f, how)


def has_reference_coupling(sys: VolterraSystem) -> bool:
    """False when no output depends on the sign of d (the objective is even in d)."""
    return bool(np.any(sys.W[:, 0, 1:] != 0))


def _decide(sys: VolterraSystem, U):
    if has_reference_coupling(sys):
        return sign(U[0, 1:]), "first_row"
    # Only d d^T is observable, so d is identifiable up to a global sign and
    # the first row of U carries nothing. Threshold the principal eigenvector
    # of the data block instead, oriented so its first entry is nonnegative.
    w, V = np.linalg.eigh(U[1:, 1:])
    v = V[:, -1]
    if v[0] < 0:
        v = -v
    return sign(v), "data_block"


def all_sign_vectors(nb: int) -> np.ndarray:
    """Every d in {+1,-1}^nb in lexicographic order with +1 before -1."""
    return np.array(list(itertools.product((1.0, -1.0), repeat=nb)))


def predict_z_batch(sys: VolterraSystem, D) -> np.ndarray:
    """predict_z for each row of D, shape (K, nr)."""
    D = np.asarray(D, dtype=float)
    W = sys.W
    return (W[:, 0, 0][None, :] + 2.0 * D @ W[:, 0, 1:].T
            + np.einsum("ki,mij,kj->km", D, W[:, 1:, 1:], D, optimize=True))


class BudgetError(ValueError):
    pass


def demodulate_ml(sys: VolterraSystem, max_nb: int = 20, chunk: int = 4096):
    """Exhaustive nearest-neighbour detection; returns ``(d_hat, residual)``.

    Ties go to the lexicographically smallest d with +1 ordered first.
    """
    if sys.nb > max_nb:
        raise BudgetError(f"exhaustive search over 2^{sys.nb} sequences exceeds the budget 2^{max_nb}")
    best_val = np.inf
    best = None
    for head in itertools.product((1.0, -1.0), repeat=max(0, sys.nb - 12)):
        tail = all_sign_vectors(min(sys.nb, 12))
        D = np.hstack([np.tile(head, (tail.shape[0], 1)), tail]) if head else tail
        for s in range(0, D.shape[0], chunk):
            Dc = D[s:s + chunk]
            res = np.sum((sys.z[None, :] - predict_z_batch(sys, Dc)) ** 2, axis=1)
            i = int(np.argmin(res))
            if res[i] < best_val:
                best_val = float(res[i])
                best = Dc[i]
    return best.astype(int), best_val


# plain-text serialisation ---------------------------------------------------

def _fmt(vals) -> str:
    return " ".join(repr(float(v)) for v in np.ravel(vals))


def dumps_system(sys: VolterraSystem) -> str:
    lines = [f"{sys.nb} {sys.npulse} {sys.nr}", _fmt(sys.q), _fmt(sys.r)]
    lines += [_fmt(row) for row in sys.P]
    for Bm in sys.B:
        lines += [_fmt(row) for row in Bm]
    lines.append(_fmt(sys.z))
    return "\n".join(lines) + "\n"


def loads_system(text: str) -> VolterraSystem:
    tok = text.split()
    if len(tok) < 3:
        raise ValueError("system file is missing its header")
    nb, npulse, nr = (int(t) for t in tok[:3])
    npl = nb * npulse
    vals = np.array([float(t) for t in tok[3:]])
    need = npl + npl + npl * nb + nr * npl * npl + nr
    if vals.size != need:
        raise ValueError(f"expected {need} values after the header, found {vals.size}")
    i = 0

    def take(k):
        nonlocal i
        out = vals[i:i + k]
        i += k
        return out

    q = take(npl)
    r = take(npl)
    P = take(npl * nb).reshape(npl, nb)
    B = take(nr * npl * npl).reshape(nr, npl, npl)
    z = take(nr)
    return VolterraSystem(nb, npulse, q, P, r, B, z)


def save_system(sys: VolterraSystem, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_system(sys))


def load_system(path) -> VolterraSystem:
    with open(path) as fh:
        return loads_system(fh.read())
