from __future__ import annotations

import numpy as np
import pytest

from meshsal.synth import grid_patch, icosphere, triangle_strip, unit_cube, vertex_fan


@pytest.fixture(scope="session")
def cube():
    return unit_cube()


@pytest.fixture(scope="session")
def sphere():
    return icosphere(2)  # 320 faces


@pytest.fixture(scope="session")
def strip():
    return triangle_strip(12)


@pytest.fixture(scope="session")
def fan():
    return vertex_fan(3)


@pytest.fixture(scope="session")
def wavy_grid():
    return grid_patch(10, 10, height_fn=lambda x, y: 0.08 * np.sin(6 * x) * np.cos(5 * y))


@pytest.fixture()
def rng():
    return np.random.default_rng(20240811)
