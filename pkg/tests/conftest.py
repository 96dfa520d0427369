import numpy as np
import pytest

from normsol.field import Grid
from normsol.landscape import compute_landscape
from normsol.optimizer import SolverSettings, autonomous_minimize, solve_regions, Levels
from normsol.params import ProblemParams
from normsol.potential import Peak, build_potential

DESK = dict(N=1, a=0.5, epsilon=0.1, eta=1.0, p=8.0, q=4.0)
DESK_L, DESK_M = 800.0, 1024


def desk_params(**changes):
    return ProblemParams(**{**DESK, **changes})


def desk_potential():
    return build_potential(0.5, [Peak((0.0,), 0.5, 4.0), Peak((10.0,), 0.5, 4.0)])


@pytest.fixture(scope="session")
def params():
    return desk_params()


@pytest.fixture(scope="session")
def potential():
    return desk_potential()


@pytest.fixture(scope="session")
def landscape(params, potential):
    return compute_landscape(params, potential.h_max)


@pytest.fixture(scope="session")
def profile(landscape):
    return landscape.profile


@pytest.fixture(scope="session")
def grid():
    return Grid(1, DESK_L, DESK_M)


@pytest.fixture(scope="session")
def settings():
    return SolverSettings()


@pytest.fixture(scope="session")
def autonomous(params, potential, profile, grid, settings):
    """(Upsilon_max, minimizer, Upsilon_inf)."""
    up_max, base = autonomous_minimize(potential.h_max, params.a, params, profile, grid, settings)
    up_inf, _ = autonomous_minimize(potential.h_infty, params.a, params, profile, grid, settings)
    return up_max, base, up_inf


@pytest.fixture(scope="session")
def records(params, potential, profile, grid, settings, autonomous):
    up_max, base, up_inf = autonomous
    recs, failures = solve_regions(params, potential, profile, grid, settings, base,
                                   levels=Levels(up_max, up_inf))
    assert not failures, failures
    return recs


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def band_limited(grid, rng, kcut=None, complex_=False):
    """Random smooth field with spectrum confined to |k| <= kcut."""
    kcut = kcut if kcut is not None else 0.25 * grid.k_max
    z = rng.standard_normal(grid.shape)
    if complex_:
        z = z + 1j * rng.standard_normal(grid.shape)
    spec = np.fft.fftn(z) * (grid.k2 <= kcut**2)
    out = np.fft.ifftn(spec)
    return out if complex_ else out.real
