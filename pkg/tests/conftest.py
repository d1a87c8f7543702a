import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gridstart.network import three_bus_case

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def non_congested():
    return three_bus_case("non_congested")


@pytest.fixture(scope="session")
def congested():
    return three_bus_case("congested")


@pytest.fixture(params=["non_congested", "congested"])
def case(request):
    return three_bus_case(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
