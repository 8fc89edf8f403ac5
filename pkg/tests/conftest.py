import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from liouville_lab import DiskGrid

settings.register_profile(
    "lab",
    derandomize=True,
    max_examples=30,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("lab")


@pytest.fixture(scope="session")
def disk33():
    return DiskGrid(1.0, 33)


@pytest.fixture(scope="session")
def disk65():
    return DiskGrid(1.0, 65)


@pytest.fixture(scope="session")
def disk129():
    return DiskGrid(1.0, 129)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260815)
