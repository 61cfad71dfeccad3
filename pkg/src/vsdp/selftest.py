"""Quick built-in invariant checks, runnable without pytest (``vsdp selftest``)."""
from __future__ import annotations

import time

import numpy as np

from . import sdp
from .symmat import eig_sym, is_feasible
from .uwb import BlockConfig, sample_channel, simulate_block
from .volterra import build_objective, demodulate_ml, demodulate_sdp, make_system, predict_z


def _random_feasible(rng, n):
    V = rng.standard_normal((n, rng.integers(1, n + 1)))
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    X = V @ V.T
    np.fill_diagonal(X, 0.0)
    return X


def check_eig(rng):
    for _ in range(20):
        n = int(rng.integers(1, 12))
        A = rng.standard_normal((n, n))
        M = A + A.T
        for method in ("lapack", "jacobi"):
            e = eig_sym(M, method)
            assert np.all(np.diff(e.eigenvalues) >= 0)
            assert np.linalg.norm(e.reconstruct() - M) <= 1e-10 * max(1.0, np.linalg.norm(M))
            assert np.linalg.norm(e.eigenvectors.T @ e.eigenvectors - np.eye(n)) <= 1e-10 * n


def check_feasible_set(rng):
    for _ in range(50):
        n = int(rng.integers(2, 12))
        X1, X2 = _random_feasible(rng, n), _random_feasible(rng, n)
        assert is_feasible(X1) and is_feasible(X2)
        b = rng.random()
        assert is_feasible(b * X1 + (1 - b) * X2)


def check_dual_certificates(rng):
    for _ in range(50):
        n = int(rng.integers(2, 12))
        A = rng.standard_normal((n, n))
        G = A + A.T
        np.fill_diagonal(G, 0.0)
        r = sdp.dual_subproblem(G).check(G)
        assert r["psd"] >= -1e-7 and r["complementarity"] <= 1e-6
        assert r["normalization"] <= 1e-6 and r["trace"] <= 1e-6


def check_solver(rng):
    for _ in range(5):
        n = 11
        L = rng.standard_normal((30, n, n))
        c = rng.standard_normal(30)
        obj = sdp.sum_of_squares(c, L)
        X, tr = sdp.solve(obj, max_iter=200, gap_tol=1e-9, keep_iterates=True)
        g0 = tr.records[0].g
        assert min(r.g for r in tr.records) <= 0.01 * g0
        for Xk, _, _ in tr.iterates:
            assert np.all(np.diag(Xk) == 0) and is_feasible(Xk)


def check_gradient(rng):
    nb = 3
    B = rng.standard_normal((4, 2 * nb, 2 * nb))
    system = make_system(nb, 2, B + B.transpose(0, 2, 1), rng.standard_normal(4))
    obj = build_objective(system)
    X = _random_feasible(rng, nb + 1)
    G = obj.grad(X)
    h = 1e-5
    for i in range(nb + 1):
        for j in range(i + 1, nb + 1):
            E = np.zeros_like(X)
            E[i, j] = E[j, i] = h
            fd = (obj.value(X + E) - obj.value(X - E)) / (2 * h)
            assert abs(fd - 2 * G[i, j]) <= 1e-5 * max(1.0, abs(fd))


def check_link(rng):
    cfg = BlockConfig()
    for _ in range(5):
        ch = sample_channel("CM1", rng)
        d = np.where(rng.random(cfg.nb) < 0.5, 1, -1)
        blk = simulate_block(cfg, ch, d)
        system = blk.system(cfg)
        assert np.max(np.abs(predict_z(system, d) - blk.z)) <= 1e-6 * np.max(np.abs(blk.z))
        assert np.array_equal(demodulate_sdp(system).d_hat, d)
        assert np.array_equal(demodulate_ml(system)[0], d)


CHECKS = [
    ("eigendecomposition", check_eig),
    ("feasible set", check_feasible_set),
    ("dual certificates", check_dual_certificates),
    ("solver convergence and feasibility", check_solver),
    ("objective gradient", check_gradient),
    ("waveform/model consistency and noiseless recovery", check_link),
]


def run_all(verbose: bool = True, seed: int = 2024) -> bool:
    ok = True
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            fn(np.random.default_rng(seed))
            status = "PASS"
        except AssertionError:
            status = "FAIL"
            ok = False
        if verbose:
            print(f"{status}  {name}  ({time.perf_counter() - t0:.2f} s)")
    return ok
