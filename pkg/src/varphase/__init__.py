"""Mixed finite-element solver for diffusional phase transformations.

Residuals and Jacobians come from a time-discrete incremental Lagrangian
in the composition, flux and affinity fields, differentiated by
forward-mode automatic differentiation.
"""

__version__ = "0.1.0"

from .energy import SingleQuadraticEnergy, TwoPhaseEnergy, TwoPhaseParams, convex_hull, double_well
from .lagrangian import BinarySystem, TernaryParams, TernarySystem
from .mesh_fem import build_interval_mesh, build_unit_square_mesh
from .scenarios import ScenarioConfig, parse_config, preset
from .solver import NewtonConfig, TimeMarchConfig, newton_solve, time_march

__all__ = [
    "__version__",
    "SingleQuadraticEnergy",
    "TwoPhaseEnergy",
    "TwoPhaseParams",
    "convex_hull",
    "double_well",
    "BinarySystem",
    "TernaryParams",
    "TernarySystem",
    "build_interval_mesh",
    "build_unit_square_mesh",
    "ScenarioConfig",
    "parse_config",
    "preset",
    "NewtonConfig",
    "TimeMarchConfig",
    "newton_solve",
    "time_march",
]
