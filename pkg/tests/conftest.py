import numpy as np
import pytest

from maeig import Disk, Rectangle, build_grid
from maeig.dirichlet import SolverConfig, solve_dirichlet
from maeig.spectral import SpectralConfig, solve_eigen


@pytest.fixture(scope="session")
def disk():
    return Disk((0.0, 0.0), 1.0)


@pytest.fixture(scope="session")
def unit_square():
    return Rectangle((0.0, 0.0), (1.0, 1.0))


@pytest.fixture(scope="session")
def disk_grid_16(disk):
    return build_grid(disk, 1.0 / 16.0)


@pytest.fixture(scope="session")
def disk_grid_32(disk):
    return build_grid(disk, 1.0 / 32.0)


@pytest.fixture(scope="session")
def square_grid_16(unit_square):
    return build_grid(unit_square, 1.0 / 16.0)


@pytest.fixture(scope="session")
def disk_psi_16(disk_grid_16):
    """Solution of det D^2 u = 1 on the disk at h = 1/16 (not normalized)."""
    g = disk_grid_16
    return solve_dirichlet(g, np.ones(g.num_interior))


@pytest.fixture(scope="session")
def disk_eigen_32(disk_grid_32):
    return solve_eigen(disk_grid_32, SpectralConfig())
