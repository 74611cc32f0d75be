import warnings

import numpy as np
import pytest

from vacuumpath.model import AnsatzFamily, ScalarPotential
from vacuumpath.reduction import Grid, ReducedSystem, tabulate


@pytest.fixture(scope="session")
def pot():
    return ScalarPotential(16.0, 1.0)


@pytest.fixture(scope="session")
def family(pot):
    return AnsatzFamily(pot, 0.5, 2)


@pytest.fixture(scope="session")
def reduced(family):
    """K and U of the reference family on a modest symmetric grid."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return tabulate(family, Grid.symmetric(1.6, 0.02))


def harmonic_system(n=801, half_width=8.0, K=1.0, omega=1.0):
    """Constant mass and exactly quadratic U; the barrier data are placeholders."""
    R = np.linspace(-half_width, half_width, n)
    U = 0.5 * K * omega**2 * R**2
    return ReducedSystem(R, np.full(n, K), U, K, K * omega**2, 0.5 * half_width, float(np.interp(0.5 * half_width, R, U)), 1)


def well_with_drop(n=801, half_width=4.0):
    """A quadratic well of curvature 16 that drops off as -R^4 beyond |R| ~ 1.3."""
    R = np.linspace(-half_width, half_width, n)
    K = 1.0 + 0.5 * R**2
    U = 8.0 * R**2 - 2.5 * R**4
    top = np.sqrt(8.0 / 5.0)
    return ReducedSystem(R, K, U, 1.0, 16.0, top, 8.0 * top**2 - 2.5 * top**4, 2)
