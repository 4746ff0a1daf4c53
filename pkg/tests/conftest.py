import numpy as np
import pytest

from casimirlab.lifshitz import SphereGeometry, ThermalConfig
from casimirlab.materials import gold_drude, quartz_substrate


@pytest.fixture(scope="session")
def geometry():
    return SphereGeometry(radius_um=101.2)


@pytest.fixture(scope="session")
def thermal():
    return ThermalConfig(temperature_k=275.0)


@pytest.fixture(scope="session")
def gold():
    return gold_drude()


@pytest.fixture(scope="session")
def quartz():
    return quartz_substrate()


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260810)
