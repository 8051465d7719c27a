import numpy as np
import pytest

from wfrsim.bench import DEFAULT_DRIVE
from wfrsim.model import NeuronParams, zero_input_rest
from wfrsim.wfr import cached_template


@pytest.fixture(scope="session")
def params():
    return NeuronParams()


@pytest.fixture(scope="session")
def spiking_params():
    return NeuronParams(i_ext=DEFAULT_DRIVE)


@pytest.fixture(scope="session")
def rest(params):
    return zero_input_rest(params)


@pytest.fixture(scope="session")
def template(params):
    return cached_template(params)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
