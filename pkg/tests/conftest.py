from pathlib import Path

import pytest

from knnga.data_model import load_bundled, synth_heart_ap

FIXTURES = Path(__file__).parent / "fixtures"

# filled by test_acceptance.py, printed in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def weather():
    return load_bundled("weather")


@pytest.fixture(scope="session")
def heart():
    return load_bundled("heart-statlog")


@pytest.fixture(scope="session")
def heart_ap():
    return synth_heart_ap(40, 1)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
