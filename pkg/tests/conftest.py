import numpy as np
import pytest

from ddissip.lti import pe_input_uniform, random_stable_siso, simulate, two_tank_plant
from ddissip.trajectory import build_data_page

# Frozen from an independent scipy oracle (signal.dimpulse / linalg.toeplitz /
# transfer-function closed loop), horizon 108.
TWO_TANK_GAIN_108 = 2.6395411321
PUBLISHED_PI_GAINS_108 = {"r_to_z": 0.6381202206, "r_to_e": 1.1490125678, "r_to_u": 0.2499201849}
PUBLISHED_PI_STEP_Z107 = 0.914936


@pytest.fixture(scope="session")
def two_tank_page():
    traj = simulate(two_tank_plant(), pe_input_uniform(223, seed=0))
    return build_data_page(traj, 110, 2, 2)


def make_page(n, seed, L=12, nu=None, extra=0):
    """Random minimal fixture of order ``n`` with just-sufficient PE data."""
    nu = n if nu is None else nu
    sys = random_stable_siso(n, seed)
    N = 2 * (L + n) - 1 + extra
    traj = simulate(sys, np.random.default_rng(seed + 1000).standard_normal(N))
    return sys, build_data_page(traj, L, nu, n)
