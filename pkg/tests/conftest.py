import numpy as np
import pytest

from communet.coding import CodeSpec


@pytest.fixture
def code75():
    return CodeSpec((0o7, 0o5), 2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
