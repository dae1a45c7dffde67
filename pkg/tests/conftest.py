import numpy as np
import pytest

from multicritic import bench
from multicritic.gridworld import GridScenario, compile_scenario, load_scenario_file, shipped_scenarios
from multicritic.mdp import Mdp

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def case1():
    return load_scenario_file(shipped_scenarios("case1"))


@pytest.fixture(scope="session")
def case1_bank_dir(case1, tmp_path_factory):
    out = tmp_path_factory.mktemp("case1-bank")
    bench.pretrain_critics(case1, bench.ExperimentConfig(), out)
    return out


@pytest.fixture
def open5():
    return GridScenario("open5", 5, (0, 0), (4, 4))


@pytest.fixture
def open3():
    return GridScenario("open3", 3, (0, 0), (2, 2))


def chain_mdp(gamma=0.9):
    """Two states, one action: s0 -> s0 (r=2) or s1 (r=4) with prob 1/2; s1 terminal."""
    P = np.zeros((2, 1, 2))
    P[0, 0] = [0.5, 0.5]
    P[1, 0, 1] = 1.0
    R = np.zeros((2, 1, 2))
    R[0, 0] = [2.0, 4.0]
    return Mdp(P, R, gamma, {1})


@pytest.fixture
def chain():
    return chain_mdp()


@pytest.fixture
def open5_mdp(open5):
    return compile_scenario(open5)
