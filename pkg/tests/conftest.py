import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def gen():
    return np.random.default_rng(1234)


_ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one acceptance line; all lines are echoed in the terminal summary."""

    def _report(number, name, passed, detail, seconds):
        line = f"criterion {number:>2} {name:<28} {'PASS' if passed else 'FAIL'}  {seconds:7.2f}s  {detail}"
        _ACCEPTANCE_LINES.append((number, line))
        print(line)

    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
