"""Spreading speeds for a Lotka-Volterra competition model with a free boundary."""
__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    ConsistencyError,
    DomainError,
    DomainExhausted,
    InvariantViolation,
    NonConverged,
    SolverError,
    StabilityError,
)
from .model import CompetitionRegime, GrowthOffsets, ModelParams, PhysicalParams, classify, nondimensionalize  # noqa: E402
