import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from switchnorm import Rng  # noqa: E402


@pytest.fixture
def rng():
    return Rng(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
