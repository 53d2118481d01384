import numpy as np
import pytest

from momex.operators import dag


def random_state(rng, n):
    """Random full-rank density matrix."""
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    r = g @ dag(g)
    return r / np.trace(r)


def random_hermitian(rng, n):
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return 0.5 * (g + dag(g))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=["numba", "numpy"])
def backend(request, monkeypatch):
    """Run a test once per kernel implementation."""
    from momex import blocks, kernels
    if request.param == "numpy":
        monkeypatch.setattr(blocks, "USE_NUMBA", False)
        monkeypatch.setattr(kernels, "USE_NUMBA", False)
    elif not blocks.USE_NUMBA:
        pytest.skip("numba kernels disabled")
    return request.param


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
