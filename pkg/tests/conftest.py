import numpy as np
import pytest

from stokeswave.capgrav import CapGravParams, capgrav_solve
from stokeswave.spectral import GridSpec, SurfaceField
from stokeswave.traveling import solve_traveling_ns, solve_traveling_stokes

# m(k) on the unit-depth strip from oracles.symbol_closed_form (40-digit solve).
FLAT_SYMBOL = {
    1: 0.12029084059132847,
    2: 0.16036250856875203,
    3: 0.1477868090125515,
    4: 0.121635961906682,
    5: 0.09944867352449627,
    6: 0.0832463683310963,
    7: 0.07141515038882602,
    8: 0.062497960359175715,
}


def cos_field(grid, amp, k=1):
    return SurfaceField.from_function(grid, lambda x: amp * np.cos(k * x))


@pytest.fixture(scope="session")
def params():
    return CapGravParams(g=1.0, sigma=1.0, b=1.0)


@pytest.fixture(scope="session")
def wave_grid():
    return GridSpec(32, 16)


@pytest.fixture(scope="session")
def phi03(wave_grid):
    return cos_field(wave_grid, 0.3)


@pytest.fixture(scope="session")
def eta_star03(phi03, params):
    return capgrav_solve(phi03, params)


@pytest.fixture(scope="session")
def stokes_waves(phi03, params, eta_star03):
    """Stokes traveling waves at gamma in {0.02, 0.01, -0.01, 0}, tol 1e-12."""
    return {
        g: solve_traveling_stokes(phi03, g, params, tol=1e-12, eta_star=eta_star03)
        for g in (0.0, 0.01, -0.01, 0.02)
    }


@pytest.fixture(scope="session")
def ns_waves(phi03, params, eta_star03):
    return {g: solve_traveling_ns(phi03, g, params, tol=1e-12, eta_star=eta_star03) for g in (0.01, 0.02)}
