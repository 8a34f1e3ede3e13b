import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from angcasimir.corrugation import Geometry  # noqa: E402
from angcasimir.gradexp import BetaModel  # noqa: E402
from angcasimir.lifshitz import Environment  # noqa: E402
from angcasimir.materials import gold  # noqa: E402

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture(scope="session")
def au():
    return gold()


@pytest.fixture(scope="session")
def room():
    return Environment(300.0)


@pytest.fixture(scope="session")
def measured_geom():
    return Geometry.measured(0.0)


@pytest.fixture(scope="session")
def beta():
    return BetaModel()


@pytest.fixture(scope="session")
def run_config():
    return ROOT / "configs" / "measurement.toml"


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
