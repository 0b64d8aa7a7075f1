import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from profmatch.reference import default_providers

settings.register_profile("default", deadline=None, max_examples=100,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def providers():
    return default_providers()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
