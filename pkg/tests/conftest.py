import random
from fractions import Fraction

import pytest
from hypothesis import settings
from hypothesis import strategies as st

from papir import PopularityProfile, ProblemParams

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

SKEWED_LAMBDAS = (2, 1, 1, 1, 1, 1)


@pytest.fixture
def skewed6():
    return PopularityProfile.from_values(SKEWED_LAMBDAS)


@pytest.fixture
def k6m1():
    return ProblemParams(6, 1)


@pytest.fixture
def rng():
    return random.Random(20240611)


def rational_weights(K):
    return st.lists(
        st.fractions(min_value=Fraction(1, 16), max_value=16, max_denominator=16),
        min_size=K,
        max_size=K,
    )


# Acceptance summary: each criterion appends one line, printed at the end of the run.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
