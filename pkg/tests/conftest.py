import math
import random

import pytest

from ctxattr import SourcePartition
from ctxattr.providers.synthetic import DEFAULT_QUERY, DEFAULT_TEMPLATE, PlantedLinearOracle

# pass/fail lines recorded by tests/test_acceptance.py, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def sigmoid_log(z: float) -> float:
    """Independent reference: log of the sigmoid via direct evaluation."""
    return math.log(1.0 / (1.0 + math.exp(-z)))


@pytest.fixture
def small_case():
    """d=3 linear oracle with hand-pickable weights."""
    texts = ["Alpha source one.", "Beta source two.", "Gamma source three."]
    weights = [1.5, -0.75, 2.0]
    intercept = -1.0
    provider = PlantedLinearOracle(texts, weights, intercept)
    partition = SourcePartition.from_texts(texts)
    return provider, partition, weights, intercept


@pytest.fixture
def default_strings():
    return DEFAULT_TEMPLATE, DEFAULT_QUERY


def random_whitespace(rng: random.Random) -> str:
    return "".join(rng.choice([" ", "  ", "\t", "\n", " \n "]) for _ in range(rng.randint(1, 2)))
