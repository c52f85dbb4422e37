"""Simulation and limit-cycle analysis for hybrid dynamical systems."""

from .errors import (
    DegenerateError,
    DivergenceError,
    HylcError,
    InvalidInputError,
    NoReturnError,
    NonConvergenceError,
    ParameterError,
    RegionError,
    TransversalityError,
)
from .flow import IntegratorConfig, flow_until_impact, rk4_step, time_to_impact
from .model import (
    HybridSystem,
    HybridTime,
    Region,
    flow_membership,
    jump_membership,
    lie_derivative_h,
    validate_assumptions,
)
from .sim import HybridArc, distance_to_samples, omega_limit_estimate, simulate

__version__ = "0.1.0"

from . import catalog, certify, cycles, discrete, linalg, robust  # noqa: E402
