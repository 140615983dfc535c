"""Exception types shared across the package."""
from __future__ import annotations


class RadoncertError(Exception):
    """Base class for all package-specific errors."""


class DomainError(RadoncertError):
    """An atom position lies outside the problem domain."""


class SignError(RadoncertError):
    """A measure that must be nonnegative carries a negative weight."""


class MassError(RadoncertError):
    """Total masses that must agree differ beyond tolerance."""


class UnsupportedDimension(RadoncertError):
    """The requested operation is only implemented for low dimensions."""


class InconsistentStationarity(RadoncertError):
    """An atom of the candidate minimizer does not saturate the dual bound."""


class BoundaryAtomError(RadoncertError):
    """A support point sits too close to the domain boundary for an interior
    second-order certificate."""


class ConeViolation(RadoncertError):
    """A direction leaves the sign-constrained cone it must belong to."""


class ConfigError(RadoncertError):
    """A scenario/config file is malformed.  Carries the offending field."""

    def __init__(self, message: str, *, field: str | None = None,
                 path: str | None = None):
        self.field = field
        self.path = path
        where = ""
        if path is not None:
            where += f" [file: {path}]"
        if field is not None:
            where += f" [field: {field}]"
        super().__init__(message + where)


class NonConvergence(RadoncertError):
    """The solver stopped without reaching a certified stationary point.

    Carries the final iterate and a residual report so the failure is
    inspectable rather than silent.
    """

    def __init__(self, message: str, *, iterate=None, report=None):
        self.iterate = iterate
        self.report = report
        super().__init__(message)
