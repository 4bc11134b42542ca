import numpy as np
import pytest
from hypothesis import settings

from hjlab import HamiltonianSpec, SolverConfig, preset, solve
from hjlab.experiments import named_initial

settings.register_profile("hjlab", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("hjlab")


@pytest.fixture(scope="session")
def quadratic():
    return HamiltonianSpec.quadratic()


@pytest.fixture(scope="session")
def unit_power():
    return preset("gaussian_power_unit")


@pytest.fixture(scope="session")
def bumped():
    return preset("gaussian_power_bumped")


@pytest.fixture(scope="session")
def tent_solution(quadratic):
    """S_t(tent) for |p|^2/2 on [-4, 4] with 401 nodes and dt = 1e-3, snapshots every quarter."""
    u0 = named_initial("tent", 4.0, 401)
    return solve(quadratic, u0, 1.0, SolverConfig(dt=1e-3), times=[0.25, 0.5, 0.75])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(LINES):
            terminalreporter.write_line(LINES[k])
