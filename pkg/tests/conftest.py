import os
import warnings
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings

warnings.filterwarnings("ignore", message="The TBB threading layer requires")

settings.register_profile("default", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIGS = os.path.join(ROOT, "configs")


def frac(x) -> Fraction:
    return Fraction(x)


@pytest.fixture(scope="session")
def lanford():
    from ulamcert.dynamics import mod1_map
    return mod1_map("2*x + 0.5*x*(1-x)")


@pytest.fixture(scope="session")
def lanford2(lanford):
    from ulamcert.dynamics import iterate_map
    return iterate_map(lanford, 2)


@pytest.fixture(scope="session")
def map235():
    from ulamcert.dynamics import linear_mod1
    return linear_mod1(Fraction(23, 5))


@pytest.fixture(scope="session")
def doubling():
    from ulamcert.dynamics import linear_mod1
    return linear_mod1(2)


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_line():
    """Record one pass/fail line per acceptance criterion (printed in the summary)."""
    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
