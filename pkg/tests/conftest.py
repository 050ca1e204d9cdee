import numpy as np
import pytest

from spdcqubits.fockspace import SpaceConfig, build_space
from spdcqubits.operators import OperatorSet, build_hamiltonian


@pytest.fixture(scope="session")
def small_config():
    return SpaceConfig(cutoffs=(3, 3, 3), pump_coupling=0.2)


@pytest.fixture(scope="session")
def small_system(small_config):
    space = build_space(small_config)
    return space, OperatorSet(space), build_hamiltonian(space, small_config)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_state(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
