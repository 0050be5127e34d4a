import numpy as np
import pytest

import finslerflow as ff


@pytest.fixture(scope="session")
def grids_small():
    return ff.build_grid(2, 32, 2 * np.pi, 32)


@pytest.fixture(scope="session")
def grids_medium():
    return ff.build_grid(2, 48, 2 * np.pi, 48)


@pytest.fixture(scope="session")
def euclidean():
    return ff.get_entry("euclidean")


@pytest.fixture(scope="session")
def conformal():
    return ff.get_entry("conformal-torus")


@pytest.fixture(scope="session")
def randers():
    return ff.get_entry("randers-torus", b=0.3)


@pytest.fixture(scope="session")
def funk():
    return ff.get_entry("funk-disk")


@pytest.fixture(scope="session")
def sphere():
    return ff.get_entry("sphere-patch", r=1.0)


@pytest.fixture(scope="session")
def quartic():
    return ff.get_entry("quartic-minkowski")
