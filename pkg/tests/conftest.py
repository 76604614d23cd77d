import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from jostscat import potential as P
from jostscat.numerics import SpatialGrid
from jostscat.spectral import build_spectral_data

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

SCATTER_GRID = SpatialGrid(80.0, 1024)
SMATRIX_GRID = SpatialGrid(120.0, 2048)
NLS_GRID = SpatialGrid(40.0, 1024)


@pytest.fixture(scope="session")
def pt1():
    return P.build_potential(P.poschl_teller(1))


@pytest.fixture(scope="session")
def sd_pt1():
    return build_spectral_data(P.build_potential(P.poschl_teller(1)))


@pytest.fixture(scope="session")
def sd_gauss_scatter():
    return build_spectral_data(P.build_potential(P.gaussian(0.3, 1.0), SCATTER_GRID),
                               orthonormalize=True)


@pytest.fixture(scope="session")
def sd_zero_scatter():
    return build_spectral_data(P.build_potential(P.zero(), SCATTER_GRID), orthonormalize=True)


@pytest.fixture(scope="session")
def sd_smatrix():
    return build_spectral_data(P.build_potential(P.gaussian(0.3, 1.0), SMATRIX_GRID),
                               orthonormalize=True)


@pytest.fixture(scope="session")
def sd_nls():
    return build_spectral_data(P.build_potential(P.poschl_teller(amplitude=0.5), NLS_GRID),
                               orthonormalize=True)


def gaussian_field(grid, centre=0.0, width=1.0, boost=0.0):
    x = grid.x
    return np.exp(-((x - centre) / width) ** 2 / 2 + 1j * boost * x)


# one line per acceptance criterion, printed after the run (tests/test_acceptance.py)
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
