import numpy as np
import pytest

from ostd.exact import TrajectoryBatch


def random_batch(rng, t, d, gamma=0.9, scale=1.0):
    """Random states and rewards for a ``t``-transition trajectory."""
    return TrajectoryBatch(scale * rng.standard_normal((t + 1, d)), rng.standard_normal(t), gamma)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
