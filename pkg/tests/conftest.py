from __future__ import annotations

import sys
from importlib import resources
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from steiner.core import read_system  # noqa: E402

FIXTURES = Path(str(resources.files("steiner") / "fixtures"))


def fixture_path(name: str) -> Path:
    return FIXTURES / name


@pytest.fixture(scope="session")
def fano():
    return read_system(fixture_path("fano.json"))


@pytest.fixture(scope="session")
def aff9():
    return read_system(fixture_path("aff9.json"))


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
