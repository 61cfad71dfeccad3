import numpy as np
import pytest

from vsdp import sdp
from vsdp.volterra import make_system


def random_feasible(rng, n, rank=None):
    """Zero-diagonal X with X + I a random correlation matrix."""
    k = rank or int(rng.integers(1, n + 1))
    V = rng.standard_normal((n, k))
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    X = V @ V.T
    np.fill_diagonal(X, 0.0)
    return X


def random_zero_diag(rng, n, scale=1.0):
    A = rng.standard_normal((n, n)) * scale
    G = A + A.T
    np.fill_diagonal(G, 0.0)
    return G


def random_sos(rng, n=11, m=30):
    L = rng.standard_normal((m, n, n))
    c = rng.standard_normal(m) * 3.0
    return sdp.sum_of_squares(c, L)


def random_system(rng, nb, npulse=2, nr=None, noise=0.0):
    """Random Volterra system with PSD-ish B[m] and z from a random d."""
    K = nb * npulse
    nr = nr or nb * npulse // 2 + 1
    B = rng.standard_normal((nr, K, K))
    B = B + B.transpose(0, 2, 1)
    code = tuple(int(v) for v in np.where(rng.random(npulse) < 0.5, -1, 1))
    d = np.where(rng.random(nb) < 0.5, -1, 1)
    sys0 = make_system(nb, npulse, B, np.zeros(nr), code)
    from vsdp.volterra import predict_z
    z = predict_z(sys0, d) + noise * rng.standard_normal(nr)
    return sys0.with_z(z), d


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
