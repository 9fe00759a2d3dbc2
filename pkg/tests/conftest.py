import numpy as np
import pytest
from hypothesis import settings

from ddesplit.scenarios import builtin

settings.register_profile("ddesplit", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("ddesplit")


@pytest.fixture(scope="session")
def heat():
    return builtin("heat-point-delay")


@pytest.fixture(scope="session")
def intro():
    return builtin("intro-nonlinear")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    module = __import__("sys").modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
