import sys

import numpy as np
import pytest
import structlog
from structlog._config import BoundLoggerLazyProxy

from app.core.observation import build_sensor_array, record_run
from app.core.wave_core import GridSpec, Phantom, SchemeParams, grid_coordinates


SMALL_CONFIG = {
    "x_min": -0.5,
    "delta_x": 0.025,
    "n_interior": 39,
    "delta_t": 0.0125,
    "final_time": 1.0,
    "delta_data": 4,
    "rank": 60,
    "max_iterations": 5,
}


@pytest.fixture(autouse=True)
def _isolate_structlog():
    """Drop loggers cached on a per-test capture stream once that stream is closed."""
    yield
    for name, module in list(sys.modules.items()):
        if name == "app" or name.startswith("app."):
            proxy = getattr(module, "logger", None)
            if isinstance(proxy, BoundLoggerLazyProxy):
                proxy.__dict__.pop("bind", None)
    if structlog.is_configured():
        from app.utils.logger import setup_logging

        setup_logging()


@pytest.fixture
def rng():
    """Seeded generator for random test matrices."""
    return np.random.default_rng(12345)


@pytest.fixture
def reference_grid():
    """dx = 1/100 with 100 interior nodes."""
    return GridSpec.from_spacing(-0.5, 0.01, 100)


@pytest.fixture
def reference_params():
    return SchemeParams(delta_t=0.005, n_steps=200, theta=0.25)


@pytest.fixture
def small_grid():
    return GridSpec.from_spacing(-0.5, 0.025, 39)


@pytest.fixture
def small_params():
    return SchemeParams(delta_t=0.0125, n_steps=80, theta=0.25)


def bump(grid, center=0.05, width=0.08, amplitude=1.0):
    """Gaussian bump with zeroed end nodes."""
    x = grid_coordinates(grid)
    values = amplitude * np.exp(-0.5 * ((x - center) / width) ** 2)
    values[0] = values[-1] = 0.0
    return values


@pytest.fixture
def small_phantom(small_grid):
    return Phantom(bump(small_grid), label="bump")


@pytest.fixture
def small_sensors(small_grid):
    return build_sensor_array(small_grid, 4)


@pytest.fixture
def small_record(small_phantom, small_grid, small_params, small_sensors):
    """Noise-free record of the small phantom."""
    return record_run(small_phantom, small_grid, small_params, small_sensors)


@pytest.fixture
def small_config():
    """Key/value pairs of a fast experiment on the small grid."""
    return dict(SMALL_CONFIG)
