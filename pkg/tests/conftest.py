import numpy as np
import pytest

from cellident.model.params import default_cell
from cellident.model.spme import init_state, simulate
from cellident.profiles import PulseConfig, PulseSet, gen_pulse_set


@pytest.fixture(scope="session")
def cell():
    return default_cell()


@pytest.fixture(scope="session")
def pulse_set(cell):
    profiles, start = gen_pulse_set(cell, PulseConfig())
    return PulseSet.from_profiles(profiles, start)


@pytest.fixture(scope="session")
def pulse_traces(cell, pulse_set):
    init = init_state(cell, *pulse_set.start)
    return [simulate(p, cell, init) for p in pulse_set.profiles]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
