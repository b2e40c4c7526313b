import copy

import pytest

from pipescope import validate_network
from pipescope.presets import EXP1_NETWORK, EXP2_NETWORK

SINGLE_PIPE = {
    "wave_speed": 1000.0,
    "gravity": 9.81,
    "vertices": ["L", "R"],
    "pipes": [
        {"id": "P", "from": "L", "to": "R", "length": 500.0, "area": {"base": 1.0, "blocks": []}}
    ],
    "x0": "R",
    "accessible": ["L"],
}


@pytest.fixture
def exp1_spec():
    return copy.deepcopy(EXP1_NETWORK)


@pytest.fixture
def exp2_spec():
    return copy.deepcopy(EXP2_NETWORK)


@pytest.fixture
def single_pipe_spec():
    return copy.deepcopy(SINGLE_PIPE)


@pytest.fixture(scope="session")
def exp1_net():
    return validate_network(EXP1_NETWORK)


@pytest.fixture(scope="session")
def exp2_net():
    return validate_network(EXP2_NETWORK)


@pytest.fixture(scope="session")
def single_pipe_net():
    return validate_network(SINGLE_PIPE)
