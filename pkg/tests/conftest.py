import numpy as np
import pytest

from cfmonitor import AssignmentStrategy, SystemConfig


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_cfg():
    """Four MNs of eight antennas, two observing and two jamming."""
    return SystemConfig(M=4, N=8, N_t=4, N_r=2, D=0.3, tau_r=2, tau_t=2,
                        assignment=AssignmentStrategy.FIXED, fixed_mask=(1, 0, 1, 0))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "ACCEPTANCE_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
