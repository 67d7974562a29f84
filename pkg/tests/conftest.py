import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "graftlab", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("graftlab")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_sl2(rng, scale=1.0):
    """Random element of SL(2, R) with positive trace-normalizable entries."""
    while True:
        m = rng.normal(0, scale, (2, 2))
        det = np.linalg.det(m)
        if abs(det) > 0.1:
            if det < 0:
                m[:, 0] *= -1
                det = -det
            return m / math.sqrt(det)
