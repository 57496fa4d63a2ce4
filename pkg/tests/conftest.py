from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

import pytest  # noqa: E402

from tiltbpm import fixtures as fx  # noqa: E402

FIXTURE_DIR = Path(__file__).resolve().parents[1] / "fixtures"

# criterion number -> (title, passed); filled by test_acceptance
CRITERIA: dict[int, tuple[str, bool]] = {}


@pytest.fixture(scope="session")
def fixture_dir() -> Path:
    return FIXTURE_DIR


@pytest.fixture(scope="session")
def checkout():
    return fx.build_shopping_checkout()


@pytest.fixture(scope="session")
def cross_border():
    return fx.build_cross_border()


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        title, ok = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}")
