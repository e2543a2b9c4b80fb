"""cascobs: observer design and simulation for cascade systems.

Subpackages by task:

* :mod:`cascobs.linalg`      dense matrix primitives (spectra, expm, even pair)
* :mod:`cascobs.sylvester`   Sylvester equation solvers
* :mod:`cascobs.design`      finite-dimensional cascade gain scheme
* :mod:`cascobs.delay`       output-delay compensation via a transport line
* :mod:`cascobs.heat`        unstable heat plant with ODE sensor dynamics
* :mod:`cascobs.regulation`  tracking-error observers for output regulation
* :mod:`cascobs.engine`      deterministic stepping, trajectories, CSV output
* :mod:`cascobs.scenario`    scenario files for the command line front end
"""

from .engine import SimConfig, SpatialFunction, Trajectory, fit_decay_rate
from .design import (CascadeSystem, ObserverGains, StateSpace,
                     design_cascade_gains)
from .delay import DelayPlant, design_delay_observer
from .heat import HeatPlant, design_heat_observer
from .regulation import (RegulationProblem, design_regulation_observer,
                         solve_regulator_equations)

__version__ = "0.1.0"

__all__ = [
    "SimConfig",
    "SpatialFunction",
    "Trajectory",
    "fit_decay_rate",
    "CascadeSystem",
    "ObserverGains",
    "StateSpace",
    "design_cascade_gains",
    "DelayPlant",
    "design_delay_observer",
    "HeatPlant",
    "design_heat_observer",
    "RegulationProblem",
    "design_regulation_observer",
    "solve_regulator_equations",
    "__version__",
]
