"""Exception hierarchy shared by services and commands.

Every error carries the process exit code the command layer should return,
the same way an HTTP exception carries its status code.
"""
from typing import Optional


class FinslerError(Exception):
    """Base class for all engine errors."""

    exit_code: int = 1

    def __init__(self, detail: str, exit_code: Optional[int] = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code


class ConfigError(FinslerError):
    """Definition or run configuration could not be parsed or validated."""

    exit_code = 2


class UnknownScenarioError(ConfigError):
    """Verification scenario is not registered."""


class DomainError(FinslerError):
    """Geometric precondition violated."""

    exit_code = 3


class OutOfDomainError(DomainError):
    """Point lies outside the chart domain (or too close to its boundary)."""


class OutOfWindowError(DomainError):
    """Point lies outside the oracle window."""


class ZeroCovectorError(DomainError):
    """Covector is zero; the slit cotangent bundle excludes it."""


class ZeroControlError(DomainError):
    """Control vector is zero."""


class InvalidGroupElementError(DomainError):
    """Group element (a, b) of the upper half-plane needs b > 0."""


class IdenticalPointsError(DomainError):
    """Boundary-value problem asked to connect a point to itself."""


class VerticalGeodesicError(DomainError):
    """Hyperbolic geodesic is a vertical line, not a circle."""


class NotStrictlyConvexError(DomainError):
    """Operation needs a strictly convex unit ball."""


class NoProgressError(DomainError):
    """Integration is stuck on a face and face sliding is not allowed."""


class NonConstantHamiltonianError(DomainError):
    """Dual norm drifts along a curve that should keep it constant."""


class UnreachableError(DomainError):
    """Target node is not reachable on the oracle graph."""


class VerificationFailure(FinslerError):
    """A verification or certification report did not pass."""

    exit_code = 4
