import os
from pathlib import Path

import pytest

from discountkit.reference_data import subject_1_series

TESTS_DIR = Path(__file__).resolve().parent
ACCEPTANCE_LINES = []


def dataset_path():
    """Location of the external 106-participant CSV, or None when absent."""
    candidates = [os.environ.get("DISCOUNTKIT_DATA"), TESTS_DIR / "data" / "cohort.csv"]
    for candidate in candidates:
        if candidate and Path(candidate).is_file():
            return Path(candidate)
    return None


@pytest.fixture
def subject1():
    return subject_1_series()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
