"""Scale-free random connection model on the unit torus: sampler, analytics and experiments."""
__version__ = "0.1.0"

from .errors import ConfigError, DomainError, InvalidArgument, NumericalFailure, RegimeError
from .model import (
    MarkedPoint,
    ModelParams,
    TorusPoint,
    connection_prob,
    pareto_quantile,
    torus_distance,
    unit_ball_volume,
)

__all__ = [
    "ConfigError", "DomainError", "InvalidArgument", "NumericalFailure", "RegimeError",
    "MarkedPoint", "ModelParams", "TorusPoint", "connection_prob", "pareto_quantile",
    "torus_distance", "unit_ball_volume",
]
