import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from tkphase import mps

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

GRID5 = (-1.0, -0.5, 0.0, 0.5, 1.0)


def dense_ring_state(tensors: np.ndarray, L: int) -> np.ndarray:
    """Normalized periodic-chain state built by explicit loops (independent of the library)."""
    d = tensors.shape[0]
    psi = np.empty(d**L, complex)
    for k, cfg in enumerate(itertools.product(range(d), repeat=L)):
        m = np.eye(2, dtype=complex)
        for s in cfg:
            m = m @ tensors[s]
        psi[k] = np.trace(m)
    return psi / np.linalg.norm(psi)


def ring_tolerance(family, g, L):
    """Finite-ring corrections scale like L |lambda_2 / lambda_1|^L."""
    w = np.sort(np.abs(np.linalg.eigvals(mps.transfer_operator(mps.family_tensors(family, g)))))[::-1]
    return 10 * L * (w[1] / w[0]) ** L + 1e-10 if w[0] > w[1] else 1e-10


def dense_operator(ops, L: int, d: int) -> np.ndarray:
    """Kronecker product of ``(site, matrix)`` pairs padded with identities."""
    table = dict(ops)
    out = np.array([[1.0 + 0j]])
    for j in range(L):
        out = np.kron(out, table.get(j, np.eye(d)))
    return out


@pytest.fixture(scope="session")
def canonical_families():
    cache = {}

    def get(family, g):
        key = (family, float(g))
        if key not in cache:
            cache[key] = mps.right_canonicalize(mps.build_family(family, float(g)))
        return cache[key]

    return get


_ACCEPTANCE: list[str] = []


def record_acceptance(line: str) -> None:
    _ACCEPTANCE.append(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
