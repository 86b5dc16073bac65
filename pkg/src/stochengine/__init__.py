"""Periodically driven Brownian heat engines in quadratic traps.

Moment dynamics, harmonic-balance steady states, closed-form optima,
cycle thermodynamics and Monte Carlo validation for overdamped and
underdamped Langevin particles.
"""
__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    EngineError,
    InvalidParameters,
    InvalidRegime,
    NumericalFailure,
)
from .model import ControlProfile, EngineParams, table1_overdamped, table1_underdamped  # noqa: E402

__all__ = [
    "__version__",
    "ConfigError",
    "ControlProfile",
    "EngineError",
    "EngineParams",
    "InvalidParameters",
    "InvalidRegime",
    "NumericalFailure",
    "table1_overdamped",
    "table1_underdamped",
]
