import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from couplergate.config import shipped_config  # noqa: E402
from couplergate.hilbert import CouplingSpec, DeviceSpec, ModeSpec  # noqa: E402


@pytest.fixture(scope="session")
def aba():
    return shipped_config("aba").device


@pytest.fixture(scope="session")
def abc():
    return shipped_config("abc").device


@pytest.fixture(scope="session")
def threeq():
    return shipped_config("threeq").device


@pytest.fixture
def qubit():
    """A bare two-level mode at 5 GHz."""
    return DeviceSpec((ModeSpec("Q", 5.0, 0.0, 2),))


@pytest.fixture
def toy_pair():
    """Two coupled three-level modes, small enough for dense reference solves."""
    return DeviceSpec((ModeSpec("A", 5.0, -0.25, 3), ModeSpec("B", 6.0, -0.3, 3)),
                      (CouplingSpec("A", "B", 0.05),))


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if not LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(LINES):
        terminalreporter.write_line(LINES[k])
