import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "ci",
    derandomize=True,
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


@pytest.fixture
def small_grid():
    from bbm_orbit.spectral import Grid

    return Grid(64, np.pi)


@pytest.fixture
def line_grid():
    """Wide grid approximating the line, as used by the dynamics experiments."""
    from bbm_orbit.spectral import Grid

    return Grid(256, 32.0 * np.pi)
