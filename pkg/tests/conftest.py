import numpy as np
import pytest

from cogroute.simkernel import FlowSpec, Simulator
from cogroute.topology import diamond_with_chord


@pytest.fixture(autouse=True, scope="session")
def audit_conservation():
    """Every simulator run in the suite checks packet conservation at each slot boundary."""
    Simulator.audit = True
    yield
    Simulator.audit = False


@pytest.fixture
def diamond():
    return diamond_with_chord()


@pytest.fixture
def heavy_flow():
    return FlowSpec(src=0, dst=3, rate=4.636e6, packet_size=1024, arrival_model="poisson")


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
