import pytest
from hypothesis import settings

from otfsra.grid import OtfsGrid

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

B_C = 1.08e6
T_C = 1.6e-3
G_CELL = 15e-6


@pytest.fixture
def grid():
    """M=18, N=96 grid of the 1.08 MHz x 1.6 ms budget."""
    return OtfsGrid(18, 96, 18 / B_C)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for reports in terminalreporter.stats.values():
        for rep in reports:
            if getattr(rep, "when", None) != "call":
                continue
            lines += [v for k, v in getattr(rep, "user_properties", ()) if k == "acceptance"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
