"""Exception hierarchy for fininfo.

Every failure category carries the exit code the CLI reports for it, so the
library raises domain errors and only ``fininfo.cli`` turns them into process
exit statuses.

Exit codes:
  0 -- success
  1 -- unexpected error
  2 -- usage error / unknown subcommand (argparse convention)
  3 -- validation or configuration error
  4 -- ingestion error
  5 -- insufficient data
  6 -- estimation error (degenerate distances, undefined divergence, ...)
"""

from __future__ import annotations


class FinInfoError(Exception):
    """Base class for all fininfo errors."""

    exit_code: int = 1


# ── Validation ──────────────────────────────────────────────────────────────


class ValidationError(FinInfoError, ValueError):
    exit_code = 3


class InvalidDistributionError(ValidationError):
    """Negative mass, non-unit sum, or a table of the wrong shape."""


class DomainError(ValidationError):
    """Argument outside a special function's domain."""


class AlignmentError(ValidationError):
    """Series whose timestamps do not line up."""


class UnsupportedQuantityError(ValidationError):
    """Closed form requested for a generator kind that does not define it."""


class ConfigError(ValidationError):
    """Invalid configuration values (pydantic validation failures land here)."""


# ── Estimation ──────────────────────────────────────────────────────────────


class EstimationError(FinInfoError):
    exit_code = 6


class DegenerateDistanceError(EstimationError):
    """A k-th neighbor distance of zero (duplicate points without jitter)."""


class DegenerateRangeError(EstimationError):
    """Pooled sample has fewer than two distinct values, so no bin edges exist."""


class DivergenceUndefinedError(EstimationError):
    """q(x) = 0 where p(x) > 0."""


class UndefinedNormalizationError(EstimationError):
    """Zero marginal entropy in a discrete NMI."""


# ── Data ────────────────────────────────────────────────────────────────────


class InsufficientDataError(FinInfoError):
    exit_code = 5


class IngestionError(FinInfoError):
    """Input file could not be parsed. ``line`` is 1-based, header included."""

    exit_code = 4

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyInputError(IngestionError):
    pass


class UsageError(FinInfoError):
    """Unknown subcommand or missing subcommand input."""

    exit_code = 2
