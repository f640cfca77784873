import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from h2sched.curve import default_curve, fit_quadratic, linearize, partition_breakpoints, quadratic_per_segment
from h2sched.model import PlantConfig

settings.register_profile("ci", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")

FROZEN_PATH = Path(__file__).parent / "oracles" / "frozen.json"


@pytest.fixture(scope="session")
def frozen():
    return json.loads(FROZEN_PATH.read_text())


@pytest.fixture(scope="session")
def curve():
    return default_curve()


@pytest.fixture(scope="session")
def plant():
    return PlantConfig()


@pytest.fixture(scope="session")
def quad(curve):
    return fit_quadratic(curve)


@pytest.fixture(scope="session")
def segs2(curve):
    return linearize(curve, partition_breakpoints(curve, 2))


@pytest.fixture(scope="session")
def segs10(curve):
    return linearize(curve, partition_breakpoints(curve, 10))


@pytest.fixture(scope="session")
def pieces2(curve):
    return quadratic_per_segment(curve, 2)


@pytest.fixture(scope="session")
def curve_data(quad, segs2, pieces2):
    return {"mil": segs2, "l": segs2, "soc": quad, "misoc": pieces2}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
