import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gausshodge.angenent import gen_angenent_torus  # noqa: E402
from gausshodge.geometry import gen_cylinder, gen_plane_disk, gen_sphere  # noqa: E402
from gausshodge.weighted_dec import assemble  # noqa: E402


@pytest.fixture(scope="session")
def plane_small():
    return gen_plane_disk(R=4.0, target_edge=0.4)


@pytest.fixture(scope="session")
def sphere3():
    return gen_sphere(radius=2.0, subdivisions=3)


@pytest.fixture(scope="session")
def cylinder_coarse():
    return gen_cylinder(radius=math.sqrt(2.0), half_length=6.0, target_edge=0.35)


@pytest.fixture(scope="session")
def angenent_coarse():
    return gen_angenent_torus(target_edge=0.3)


@pytest.fixture(scope="session")
def angenent_ops(angenent_coarse):
    return assemble(angenent_coarse, variant="galerkin")
