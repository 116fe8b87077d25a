import numpy as np
import pytest

from lane_emden_hole.ground_state import critical_pair, solve_limit_system
from lane_emden_hole.greens import h_tilde_center
from lane_emden_hole.reduced_energy import energy_constants, saddle_closed_form

FIXTURE_PAIRS = [(5, 1.2), (4, 1.25), (5, 1.05)]

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def pair52():
    return critical_pair(5, 1.2)


@pytest.fixture(scope="session")
def gs52(pair52):
    return solve_limit_system(pair52)


@pytest.fixture(scope="session")
def ground_states():
    return {(N, p): solve_limit_system(critical_pair(N, p)) for N, p in FIXTURE_PAIRS}


@pytest.fixture(scope="session")
def h0_52(pair52):
    return h_tilde_center(pair52)


@pytest.fixture(scope="session")
def ec52(gs52, h0_52):
    return energy_constants(gs52, h0_52)


@pytest.fixture(scope="session")
def d52(ec52, gs52):
    return saddle_closed_form(ec52, gs52)


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
