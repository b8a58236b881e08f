import numpy as np
import pytest

from ibody.body import ball_body, make_body
from ibody.radon import assemble_operator

# lines collected by test_acceptance.py, echoed in the terminal summary
ACCEPTANCE_LINES = {}


@pytest.fixture(scope="session")
def body03():
    return make_body(5, 0.3, resolution=8)


@pytest.fixture(scope="session")
def op03(body03):
    return assemble_operator(body03.grid)


@pytest.fixture(scope="session")
def ball5():
    return ball_body(5, 8)


@pytest.fixture(scope="session")
def ball_op(ball5):
    return assemble_operator(ball5.grid)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES, key=str):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
