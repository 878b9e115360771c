import numpy as np
import pytest

from intensive.gaussian import CovarianceMatrix

_CRITERIA: list[str] = []


def random_state(rng: np.random.Generator, n: int, max_nu: float = 4.0) -> CovarianceMatrix:
    """Random physical state ``Q = S D S^T``, ``P = S^{-T} D S^{-1}`` with ``D >= 1``."""
    S = np.eye(n) + 0.4 * rng.standard_normal((n, n))
    D = np.diag(rng.uniform(1.0, max_nu, n))
    Sinv = np.linalg.inv(S)
    Q = S @ D @ S.T
    P = Sinv.T @ D @ Sinv
    return CovarianceMatrix(0.5 * (Q + Q.T), 0.5 * (P + P.T))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def criterion():
    """Record a one-line verdict for the acceptance summary."""

    def record(number, name, passed, detail=""):
        line = f"[criterion {number}] {'PASS' if passed else 'FAIL'} {name}" + (f" :: {detail}" if detail else "")
        _CRITERIA.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
