"""Shared fixtures: the reference heat configuration and its (expensive)
simulation, reused across test modules."""

import numpy as np
import pytest

from cascobs.engine import SimConfig, SpatialFunction
from cascobs.heat import HeatPlant, design_heat_observer, simulate_heat_observer

# reference benchmark configuration: two-state sensor in front of the
# unstable heat plant with mu = 4, F0 = (-1, -1), modal pole set {-2}
REF_MU = 4.0
REF_A1 = [[0.0, -1.0], [1.0, 0.0]]
REF_B1 = [[1.0], [1.0]]
REF_C1 = [[1.0, 1.0]]
REF_F0 = np.array([[-1.0], [-1.0]])
REF_MODAL_POLES = [-2.0]

# exact design values for this configuration, frozen from two independent
# oracles (symbolic quadrature of the closed-form kernel, and the reduced
# single-mode Sylvester solve); they agree to 15 digits
EXACT_GAMMA1 = -0.675834993831694
EXACT_L1 = 5.227013889439702
EXACT_F1 = np.array([-1.6138130098841996, -3.918785889843461])


@pytest.fixture(scope="session")
def ref_plant():
    return HeatPlant(REF_MU, REF_A1, REF_B1, REF_C1)


@pytest.fixture(scope="session")
def ref_design(ref_plant):
    return design_heat_observer(ref_plant, REF_F0, REF_MODAL_POLES, grid=100)


def run_reference_sim(plant, gains, dx=0.01, dt=4e-5, horizon=3.0):
    grid = round(1.0 / dx)
    xs = np.linspace(0.0, 1.0, grid + 1)
    return simulate_heat_observer(
        plant, gains, lambda t: 0.0,
        v0=[1.0, 1.0], w0=SpatialFunction(1.0, np.sin(np.pi * xs)),
        vhat0=[0.0, 0.0], what0=SpatialFunction(1.0, np.zeros(grid + 1)),
        cfg=SimConfig(dt=dt, T=horizon, dx=dx,
                      record_every=max(1, round(0.01 / dt))))


@pytest.fixture(scope="session")
def ref_trajectory(ref_plant, ref_design):
    """The full-length reference run: 75k steps, about 5 s."""
    return run_reference_sim(ref_plant, ref_design)
