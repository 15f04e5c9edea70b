import numpy as np
import pytest

from cr3bp_nav import dynamics as dy
from cr3bp_nav import fitting as fi

MU = dy.EARTH_MOON_MU


def pytest_addoption(parser):
    parser.addoption(
        "--long-running", action="store_true", default=False,
        help="run degree counts that take tens of minutes")


@pytest.fixture(scope="session")
def long_running(request):
    return request.config.getoption("--long-running")


def plant_friendly_family(kind, seed=0):
    """Synthetic real family with a nonempty real locus near the unit
    ellipse for every C in (-1, 1): ideal for planting oracles."""
    rng = np.random.default_rng(seed)
    exps = fi.g_exponents(kind)
    alpha = 0.05 * rng.standard_normal((len(exps), 4))
    alpha[exps.index((2, 0))] += [1.0, 0.2, 0.0, 0.1]
    alpha[exps.index((0, 2))] += [1.5, -0.3, 0.1, 0.0]
    beta = None
    if fi.is_halo_kind(kind):
        beta = 0.2 * rng.standard_normal((len(fi.h_exponents(kind)), 4))
    return fi.FamilyModel(kind, alpha, beta, (-1.0, 1.0))


@pytest.fixture(scope="session")
def lyapunov_orbits():
    """Narrow L1 amplitude window where the quartic family is exact to
    well below 1e-8."""
    amps = np.linspace(0.006, 0.014, 6)
    return [dy.find_periodic_orbit(MU, "LyapunovL1", amplitude=a)
            for a in amps]


@pytest.fixture(scope="session")
def lyapunov_family(lyapunov_orbits):
    pairs = [(o.jacobi, p) for o in lyapunov_orbits
             for p in dy.sample_orbit(o, 150)[:, :2]]
    return fi.fit_family_one_stage(pairs, "LyapunovQuartic", c_degree=3)


@pytest.fixture(scope="session")
def halo_orbits():
    amps = np.linspace(0.04, 0.09, 6)
    return [dy.find_periodic_orbit(MU, "HaloL1", amplitude=a)
            for a in amps]


@pytest.fixture(scope="session")
def halo_family(halo_orbits):
    pairs = [(o.jacobi, p) for o in halo_orbits
             for p in dy.sample_orbit(o, 150)]
    return fi.fit_family_one_stage(pairs, "HaloQuartic", c_degree=3)
