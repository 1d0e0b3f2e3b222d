import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from iofm import scenario, simnet  # noqa: E402

GOLDEN = Path(__file__).parent / "golden"
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def fig1():
    return scenario.load("fig1-mixed")


@pytest.fixture(scope="session")
def fig1_result(fig1):
    return simnet.run(fig1)


@pytest.fixture(scope="session")
def fig1_sim(fig1):
    sim = simnet.Simulation(fig1)
    sim.run()
    return sim


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
