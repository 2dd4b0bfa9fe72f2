import numpy as np
import pytest

from ptrabi.core import ModelKind, ModelParams


@pytest.fixture
def btp():
    return ModelParams(0.5, 0.1, 0.2, ModelKind.BTP)


@pytest.fixture
def dtp():
    return ModelParams(0.5, 0.0, 0.25, ModelKind.DTP)


def sector_eigs(params, q, n_max=120):
    from ptrabi.core import sector_hamiltonian

    w = np.linalg.eigvals(sector_hamiltonian(params, n_max, q))
    return w[np.argsort(w.real)]


def same_multiset(a, b, atol):
    """Largest distance under the optimal one-to-one matching of two point sets."""
    from scipy.optimize import linear_sum_assignment

    a, b = np.asarray(a), np.asarray(b)
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return len(a) == len(b) and cost[rows, cols].max() <= atol


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
