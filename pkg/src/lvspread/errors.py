"""Exception types shared by the solvers and the command line."""


class DomainError(ValueError):
    """Input outside the domain of an operation."""


class ConfigError(DomainError):
    """Malformed or unreadable key-value configuration."""


class SolverError(RuntimeError):
    """A numerical procedure failed; ``trace`` carries diagnostics."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace if trace is not None else {}


class NonConverged(SolverError):
    """Time marching hit its cap without reaching a steady state."""


class InvariantViolation(SolverError):
    """A structural invariant (e.g. front monotonicity) was broken."""


class StabilityError(SolverError):
    """A field left its a-priori bounds; the time step is too large."""


class DomainExhausted(SolverError):
    """The free boundary came too close to the edge of the v-domain."""


class ConsistencyError(SolverError):
    """An internal consistency check failed."""
