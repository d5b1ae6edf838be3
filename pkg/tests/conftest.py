import numpy as np
import pytest

from cavitycool.analysis import compute_band_basis
from cavitycool.grid import SpatialGrid
from cavitycool.params import PhysicalParams, derive_scaled


@pytest.fixture(scope="session")
def paper_scaled():
    return derive_scaled(PhysicalParams())


@pytest.fixture(scope="session")
def grid512(paper_scaled):
    return SpatialGrid.for_lattice(paper_scaled.ktilde, 512, 1)


@pytest.fixture(scope="session")
def grid64(paper_scaled):
    return SpatialGrid.for_lattice(paper_scaled.ktilde, 64, 1)


@pytest.fixture(scope="session")
def band_basis(paper_scaled, grid512):
    return compute_band_basis(paper_scaled, grid512)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
