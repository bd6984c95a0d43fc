import numpy as np
import pytest

from smfv.model import build_system

import _report


@pytest.fixture(scope="session")
def coeffs_1d():
    """Three-species coefficient set of the 1D experiments."""
    return np.array([[0.0, 0.2, 1.0],
                     [0.2, 0.0, 0.1],
                     [1.0, 0.1, 0.0]])


@pytest.fixture(scope="session")
def system_1d(coeffs_1d):
    return build_system(coeffs_1d)


@pytest.fixture(scope="session")
def coeffs_2d():
    """Three-species coefficient set of the 2D experiment."""
    return np.array([[0.0, 0.1, 0.2],
                     [0.1, 0.0, 2.0],
                     [0.2, 2.0, 0.0]])


@pytest.fixture(scope="session")
def system_2d(coeffs_2d):
    return build_system(coeffs_2d)


def pytest_terminal_summary(terminalreporter):
    if _report.LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in _report.LINES:
            terminalreporter.write_line(line)
