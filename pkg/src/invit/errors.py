"""Exception hierarchy for the invit toolkit.

The CLI maps these onto exit codes: configuration and input-format problems
(:class:`ValidationError`) exit with 1, everything else raised by the toolkit
(:class:`InvitError` subclasses or unexpected failures) exits with 2.
"""

from __future__ import annotations

__all__ = [
    "InvitError",
    "ValidationError",
    "DomainError",
    "ResourceLimitError",
    "EstimateConditionError",
]


class InvitError(Exception):
    """Base class for all errors raised by the toolkit."""


class ValidationError(InvitError):
    """A config file, data file, or argument combination is malformed."""


class DomainError(InvitError, ValueError):
    """An input is outside the mathematical domain of an operation."""


class ResourceLimitError(InvitError):
    """A requested object exceeds the configured size cap."""


class EstimateConditionError(InvitError):
    """An estimator denominator fell below the conditioning floor."""
