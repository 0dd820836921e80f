import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from medpath.model import Dataset
from medpath.simgen import Scenario, generate

settings.register_profile(
    "medpath", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("medpath")


def random_dataset(rng, n=20, p=3, signal=1.0):
    x = rng.binomial(1, 0.5, n).astype(float)
    x[:2] = (1.0, 0.0)
    a = signal * rng.normal(size=p) * (rng.random(p) < 0.6)
    b = signal * rng.normal(size=p) * (rng.random(p) < 0.6)
    m = np.outer(x, a) + rng.normal(size=(n, p))
    y = x * rng.normal() + m @ b + rng.normal(size=n)
    return Dataset(x, m, y)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def small_sim():
    return generate(Scenario(n=50, p=30, seed=11))


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
