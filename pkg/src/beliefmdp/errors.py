"""Exception hierarchy shared by every module.

``DomainError`` subclasses map to CLI exit code 1, ``SchemaError`` to exit code 2.
"""


class BeliefMDPError(Exception):
    """Base class for all package errors."""


class SchemaError(BeliefMDPError):
    """Malformed input: wrong shapes, unparseable files, bad probe specs."""


class DomainError(BeliefMDPError, ValueError):
    """Input is well formed but outside the domain of the operation."""


class EvaluationError(DomainError):
    """An integrand evaluated to a non-finite value on the support."""


class UnobservableEvidence(DomainError):
    """The conditioning observation has probability zero."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class AssumptionViolation(DomainError):
    """Assumption (D) or (P) does not hold for the requested computation."""


class CoverageError(DomainError):
    """A belief or a probability mass falls outside the configured grid."""

    def __init__(self, message, escaping_mass=None):
        super().__init__(message)
        self.escaping_mass = escaping_mass


class BudgetExceeded(DomainError):
    """The reachable belief tree exceeds the node budget."""


class PolicyError(DomainError):
    """A policy emitted an action outside the action space."""


class NumericalError(DomainError):
    """A linear-algebra step failed (singular innovation covariance)."""
