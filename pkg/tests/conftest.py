import numpy as np
import pytest

from mphstar.model import MphStarModel, random_model

# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


def model_a():
    """Single state, Z_1 ~ Exp(3) and Z_2 = 2 Z_1."""
    return MphStarModel([1.0], [[-3.0]], [[1.0], [2.0]])


def model_b():
    """Z_1 ~ Exp(2) and Z_2 ~ Exp(1), independent."""
    return MphStarModel([1.0, 0.0], [[-1.0, 1.0], [0.0, -2.0]], [[0.0, 1.0], [1.0, 0.0]])


def model_c():
    """Z_2 ~ Exp(2); Z_1 = 0 w.p. 1/2, else Exp(1)."""
    return MphStarModel([1.0, 0.0], [[-2.0, 1.0], [0.0, -1.0]], [[0.0, 1.0], [1.0, 0.0]])


def random_models(count, seed=20240611, max_m=6):
    rng = np.random.default_rng(seed)
    return [random_model(rng, int(rng.integers(1, max_m + 1))) for _ in range(count)]


@pytest.fixture
def A():
    return model_a()


@pytest.fixture
def B():
    return model_b()


@pytest.fixture
def C():
    return model_c()


@pytest.fixture(scope="session")
def random_200():
    return random_models(200)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
