"""Local flows on metric spaces, Euler polygonals and their dyadic limits."""
from .core import (
    GridSpace,
    LocalFlow,
    OmegaModulus,
    ProcessApprox,
    ScalarSpace,
    Schedule,
    VectorSpace,
    ZERO_MODULUS,
    compose_euler,
    dyadic_process,
    dyadic_tail_bound,
    euler_epsilon,
    euler_error_bound,
    osgood_integral,
    tangency_bound,
)
from .errors import *  # noqa: F401,F403

__version__ = "0.1.0"
