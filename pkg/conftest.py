import math

import numpy as np
import pytest

from logic.channel_model import AoaGrid, ArrayGeometry, ScenarioParams, generate_scenario


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def unit_grid_set():
    """10 single-path unit-gain users, 0.3 rad apart, M = 8"""
    return generate_scenario(ArrayGeometry(8), 10, 1, AoaGrid(min_separation=0.3), "unit", seed=7)


@pytest.fixture
def multipath_set():
    return generate_scenario(ArrayGeometry(16), 24, 3, AoaGrid(min_separation=0.1), "complex-gaussian", seed=11)


@pytest.fixture
def small_scenario():
    return ScenarioParams(num_antennas=8, num_users=40, num_paths=1,
                          aoa_grid=AoaGrid(min_separation=math.pi / 50), seed=3)
