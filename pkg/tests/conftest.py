import math

import numpy as np
import pytest

from ddelab.dde import System, integrate
from ddelab.history import HistoryFunction
from ddelab.manifold import shoot_branch
from ddelab.periodic import connection_diagram, detect_periodic
from ddelab.threshold import find_dstar

HOPF_C = 5.0 * math.pi / (3.0 * math.sqrt(3.0))


@pytest.fixture(scope="session")
def dstar_c1():
    """Critical-gain bracket for c = 1 at the acceptance tolerance."""
    return find_dstar(1.0, tol=5e-5)


@pytest.fixture(scope="session")
def x1_orbit_n100():
    """Stable orbit of the (1, 7.38, n=100) system plus its trajectory."""
    system = System.smooth(1.0, 7.38, n=100)
    traj = integrate(system, HistoryFunction.constant(1.2), 400.0, N=400)
    orbit = detect_periodic(traj, level=1.0, transient=300.0)
    assert orbit is not None
    return system, traj, orbit


@pytest.fixture(scope="session")
def x1_diagram():
    return connection_diagram(1.0, 7.38, 2.0, 200)


@pytest.fixture(scope="session")
def x2_diagram():
    return connection_diagram(4.0, 12.71, 2.0, 200)


@pytest.fixture(scope="session")
def hopf_diagram():
    return connection_diagram(HOPF_C, 25.0, 2.0, 100, with_hopf=True, hopf_alphas=(0.2,), T_fate=300.0)


@pytest.fixture(scope="session")
def plus_branch_limit_1():
    return shoot_branch(System.limit(1.0, 7.38), "plus", T=40.0)


@pytest.fixture(scope="session")
def plus_branch_smooth_200():
    return shoot_branch(System.smooth(1.0, 7.38, n=200), "plus", T=60.0, N=800)


def maximal_runs(mask: np.ndarray, tt: np.ndarray):
    """Maximal index runs where ``mask`` holds, as (t_start, length, i, j)."""
    runs = []
    i = 0
    while i < len(mask):
        if mask[i]:
            j = i
            while j + 1 < len(mask) and mask[j + 1]:
                j += 1
            runs.append((tt[i], tt[j] - tt[i], i, j))
            i = j + 1
        else:
            i += 1
    return runs
