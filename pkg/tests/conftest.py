import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from anosov_flex.torus_core import HyperbolicMatrix  # noqa: E402
from anosov_flex.twist_map import LinearMap, TwistMap, default_twist_params  # noqa: E402

LAMBDA_GOLDEN = 0.9624236501192069


@pytest.fixture(scope="session")
def M():
    return HyperbolicMatrix(2, 1, 1, 1)


@pytest.fixture(scope="session")
def linear(M):
    return LinearMap(M)


@pytest.fixture(scope="session")
def twist16(M):
    return TwistMap(M, default_twist_params(M, 1 / 16))


@pytest.fixture(scope="session")
def twist4(M):
    return TwistMap(M, default_twist_params(M, 1 / 4))


@pytest.fixture(scope="session")
def golden_lambda() -> float:
    """log of the golden-mean squared, the linear exponent of [[2,1],[1,1]]."""
    return math.log((3 + math.sqrt(5)) / 2)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(LINES):
            terminalreporter.write_line(LINES[n])
