"""Exception types raised across the package."""


class SymbohmError(Exception):
    """Base class for all package errors."""


class NotAHomomorphism(SymbohmError):
    """A candidate topological factor violates multiplicativity."""


class PreconditionViolation(SymbohmError, ValueError):
    """An input falls outside the documented domain of an operation."""


class CoincidenceError(SymbohmError, ValueError):
    """Two particles occupy the same position; the configuration is off the quotient."""


class DegenerateStateError(SymbohmError, ValueError):
    """A (anti)symmetrized state vanishes identically or has zero norm."""


class QuadratureError(SymbohmError):
    """Quadrature failed to reach the requested tolerance."""

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class NodeProximityError(SymbohmError):
    """The guidance velocity is undefined because |psi| fell below the node floor."""

    def __init__(self, message, abs_psi=None, location=None, time=None):
        super().__init__(message)
        self.abs_psi = abs_psi
        self.location = location
        self.time = time


class IntegrationStalled(SymbohmError):
    """Adaptive step size underflowed for reasons other than node proximity."""


class PeriodicityViolation(SymbohmError):
    """The wave function obeys the periodicity condition for no character."""


class TransportDegraded(SymbohmError):
    """Too many ensemble members failed to transport."""

    def __init__(self, message, failures=0, total=0):
        super().__init__(message)
        self.failures = failures
        self.total = total


class DomainTooSmall(SymbohmError, ValueError):
    """A grid does not cover the support of the initial packets."""


class SolverError(SymbohmError):
    """A linear solve inside the grid propagator failed."""


class GridAsymmetryError(SymbohmError, ValueError):
    """Particle exchange is not an exact symmetry of the grid."""
