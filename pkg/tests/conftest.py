import pytest

from maxbcg.catalog import RegionBounds, generate_synthetic_kcorr
from maxbcg.partition import RunGeometry

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def kcorr():
    return generate_synthetic_kcorr(1000, 0.5)


@pytest.fixture(scope="session")
def target():
    return RegionBounds(180.0, 183.0, 0.0, 3.0)


@pytest.fixture(scope="session")
def geometry(target):
    return RunGeometry.from_target(target, 0.5)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
