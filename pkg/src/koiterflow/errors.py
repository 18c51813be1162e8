"""Exception types raised by the solver and its checks."""


class KoiterFlowError(Exception):
    """Base class for all package errors."""


class InvalidDisplacementError(KoiterFlowError):
    """Displacement at or beyond the tube radius, or a degenerate geometry."""


class OutOfDomainError(KoiterFlowError):
    """Point outside the closure of the (reference or deformed) domain."""


class FluxCompatibilityError(KoiterFlowError):
    """Boundary data whose net flux does not vanish.

    The offending integral is kept in ``flux``.
    """

    def __init__(self, message, flux):
        super().__init__(message)
        self.flux = flux


class InvalidParametersError(KoiterFlowError):
    """Physical or numerical parameters outside their admissible range."""


class SolverConvergenceError(KoiterFlowError):
    """An iterative solve stopped before reaching its tolerance."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = list(residuals or [])


class SPDViolationError(KoiterFlowError):
    """A matrix that must be symmetric positive definite failed to factorize."""


class OrderingError(KoiterFlowError):
    """The regularized initial displacement falls below the original one."""


class ConfigError(KoiterFlowError):
    """Configuration text that does not parse or validate."""

    def __init__(self, message, key=None, line=None):
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.key = key
        self.line = line


class AliasingWarning(UserWarning):
    """Spectral content too close to the grid resolution."""
