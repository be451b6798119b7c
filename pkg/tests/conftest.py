import numpy as np
import pytest

from bristletrack import (AxleTireParams, Grid, VehicleBodyParams,
                          build_kernels, build_matrices, solve_equilibrium,
                          synthesize_gains)
from bristletrack.sim import SimConfig


@pytest.fixture(scope="session")
def body():
    return VehicleBodyParams(mass=1300.0, yaw_inertia=2000.0, dist_front=1.4,
                             dist_rear=1.0, speed=50.0, wind_force=-500.0,
                             wind_offset=-0.3, theta=1.0, eps=0.0)


@pytest.fixture(scope="session")
def axles():
    front = AxleTireParams(patch_len=0.11, stiffness=240.0, shape_a=0.1, fz=2660.0,
                           carcass_phi=0.92, carcass_psi=0.08)
    rear = AxleTireParams(patch_len=0.09, stiffness=269.0, shape_a=0.1, fz=3720.0,
                          carcass_phi=0.92, carcass_psi=0.08)
    return front, rear


@pytest.fixture(scope="session")
def mats(body, axles):
    return build_matrices(body, axles)


@pytest.fixture(scope="session")
def grid50():
    return Grid(50)


@pytest.fixture(scope="session")
def kernels50(grid50, mats):
    return build_kernels(grid50, mats)


@pytest.fixture(scope="session")
def eq50(mats, kernels50, grid50):
    return solve_equilibrium(mats, kernels50, grid50, x_star=np.zeros(2))


@pytest.fixture(scope="session")
def gains50(eq50, mats, kernels50, grid50):
    return synthesize_gains(2.0, eq50, mats, kernels50, grid50)


@pytest.fixture(scope="session")
def nominal_cfg():
    # default config == the reference closed-loop scenario
    return SimConfig()


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(0)
