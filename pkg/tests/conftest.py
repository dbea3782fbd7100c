import math

import pytest
from hypothesis import settings

from elliptic_billiards import Ellipse

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def frame_for(e: float, a: float = 1.0) -> Ellipse:
    return Ellipse(a, a * math.sqrt(1 - e * e))


@pytest.fixture
def frame():
    return frame_for(0.3)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
