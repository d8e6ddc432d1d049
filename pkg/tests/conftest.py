import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from curlforce import HamiltonianSpec

from oracles import EXAMPLES

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("default")

BOX = (-2.0, 2.0)

ACCEPTANCE_LINES = []


def example_spec(name, box=BOX):
    text, n, _ = EXAMPLES[name]
    return HamiltonianSpec.from_expr(text, n, [[box] * n], label=name)


@pytest.fixture(params=sorted(EXAMPLES))
def example(request):
    return request.param, example_spec(request.param), EXAMPLES[request.param][2]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
