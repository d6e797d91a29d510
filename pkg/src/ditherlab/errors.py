"""Exception hierarchy shared across the package.

Every error raised on a user-triggerable path derives from DitherlabError so
callers (CLI, service) can map failures to exit codes and HTTP statuses
without matching on message text.
"""

from __future__ import annotations

__all__ = [
    "DitherlabError",
    "ConfigError",
    "DomainError",
    "DegenerateStatsError",
    "SamplerCapError",
    "SearchCapError",
    "RateInfeasibleError",
    "PreconditionError",
]


class DitherlabError(Exception):
    """Base class for all package errors."""


class ConfigError(DitherlabError):
    """Malformed or inconsistent configuration input."""


class DomainError(DitherlabError):
    """Argument outside the mathematical domain of an operation."""


class DegenerateStatsError(DitherlabError):
    """Second-order statistics too singular for estimator algebra."""


class SamplerCapError(DitherlabError):
    """Rejection sampler exceeded its configured attempt budget."""


class SearchCapError(DitherlabError):
    """Decoder search would exceed the configured evaluation budget."""


class RateInfeasibleError(DitherlabError):
    """Requested code rates cannot be realized at the given block length."""


class PreconditionError(DitherlabError):
    """A stated precondition of a check or formula does not hold."""
