import cmath
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ellnewton import acceptance as acc
from ellnewton import lattice as lat

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def square():
    return lat.make_lattice(1.0, 1j)


@pytest.fixture(scope="session")
def hexagonal():
    return lat.make_lattice(1.0, cmath.exp(1j * math.pi / 3))


@pytest.fixture(scope="session")
def skew():
    return lat.make_lattice(1.0, 0.9 + 1.1j)


@pytest.fixture(scope="session")
def tri():
    return acc.triangular_lattice()


@pytest.fixture(scope="session")
def lattices(square, hexagonal, skew):
    return {"square": square, "hexagonal": hexagonal, "skew": skew,
            "rect": lat.make_lattice(1.0, 2j), "long": lat.make_lattice(1.0, 5 + 0.3j)}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def cell_points(lattice, n, rng, min_dist=0.05):
    return acc.random_cell_points(lattice, n, rng, min_dist)
