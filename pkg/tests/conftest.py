import numpy as np
import pytest
from hypothesis import settings

from voltcast.ingest import aggregate_monthly
from voltcast.synthetic import synthetic_hourly

settings.register_profile("ci", max_examples=200, deadline=None)
settings.register_profile("fast", max_examples=20, deadline=None)
settings.load_profile("ci")

SEED = 20240601


@pytest.fixture(scope="session")
def hourly():
    return synthetic_hourly(1993, 24, seed=7)


@pytest.fixture(scope="session")
def monthly(hourly):
    return aggregate_monthly(hourly, "peak")


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    def record(number, ok, detail):
        status = "PASS" if ok is True else ("SKIP" if ok is None else "FAIL")
        ACCEPTANCE_LINES.append(f"criterion {number:>2}: {status}  {detail}")
        print(ACCEPTANCE_LINES[-1])

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
