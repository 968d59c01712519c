import numpy as np
import pytest

from wlkalman.algebra import SecondOrderStats, augment_blocks
from wlkalman.model import StateSpaceModel
from wlkalman.network import NetworkTopology, random_geometric_topology


def random_stats(rng, n, scale=1.0, rank=None):
    """Random valid second-order statistics from a random real composite covariance."""
    g = rng.standard_normal((2 * n, rank or 2 * n))
    c = scale * g @ g.T / g.shape[1] + 1e-3 * np.eye(2 * n)
    caa, cbb, cab = c[:n, :n], c[n:, n:], c[:n, n:]
    R = caa + cbb + 1j * (cab.T - cab)
    P = caa - cbb + 1j * (cab.T + cab)
    return SecondOrderStats(0.5 * (R + R.conj().T), 0.5 * (P + P.T))


def random_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_model(rng, L=2, N=3, K=1, widely=True, correlated=True, circular=False, x0=True):
    """Random stable model; ``widely=False`` gives A = 0, B = 0."""
    F = random_complex(rng, L, L)
    A = random_complex(rng, L, L) if widely else np.zeros((L, L))
    rho = np.max(np.abs(np.linalg.eigvals(augment_blocks(F, A))))
    F, A = 0.95 * F / rho, 0.95 * A / rho
    H = random_complex(rng, N, K, L)
    B = 0.5 * random_complex(rng, N, K, L) if widely else None
    if circular:
        q = random_complex(rng, L, L)
        w = SecondOrderStats(q @ q.conj().T / L + 0.1 * np.eye(L))
        r = random_complex(rng, N * K, N * K)
        Rv = r @ r.conj().T / (N * K) + 0.1 * np.eye(N * K)
        if not correlated:
            Rv = np.kron(np.eye(N), Rv[:K, :K])
        v = SecondOrderStats(Rv)
    else:
        w = random_stats(rng, L)
        v = random_stats(rng, N * K)
        if not correlated:
            blocks = [random_stats(rng, K) for _ in range(N)]
            Rv = np.zeros((N * K, N * K), complex)
            Pv = np.zeros((N * K, N * K), complex)
            for i, s in enumerate(blocks):
                Rv[i * K:(i + 1) * K, i * K:(i + 1) * K] = s.cov
                Pv[i * K:(i + 1) * K, i * K:(i + 1) * K] = s.pcov
            v = SecondOrderStats(Rv, Pv)
    return StateSpaceModel(F, H, w, v, A=A, B=B, x0=random_complex(rng, L) if x0 else None)


def random_topology(rng, n):
    if n == 1:
        return NetworkTopology.isolated(1)
    return random_geometric_topology(n, 0.6, int(rng.integers(2 ** 31)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        terminalreporter.write_line(results[k])
