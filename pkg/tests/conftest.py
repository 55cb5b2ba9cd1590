import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# numeric property tests do real linear algebra; don't let the default
# per-example deadline flake on slow CI boxes
settings.register_profile(
    "numeric", deadline=None, suppress_health_check=(HealthCheck.too_slow,)
)
settings.load_profile("numeric")


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)
