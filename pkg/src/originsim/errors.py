"""Exception hierarchy.

Two broad families matter to callers: ``DataError`` (bad or inconsistent
input data, CLI exit code 3) and ``NumericalError`` (solver / numerical
failures, CLI exit code 4). Everything derives from ``OriginsimError``.
"""

from __future__ import annotations


class OriginsimError(Exception):
    """Base class for all package-specific errors."""


class DomainError(OriginsimError, ValueError):
    """An argument violates a documented precondition or invariant."""


class DataError(OriginsimError):
    """A dataset is malformed, inconsistent, or insufficient."""


class ParseError(DataError):
    """A row or value could not be parsed.

    Carries the 1-based line number and the offending column name so the
    message can point at the exact cell.
    """

    def __init__(self, message: str, *, line: int | None = None,
                 column: str | None = None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if column is not None:
            loc.append(f"column {column!r}")
        suffix = f" ({', '.join(loc)})" if loc else ""
        super().__init__(message + suffix)
        self.line = line
        self.column = column


class SchemaError(DataError):
    """A file violates its schema (duplicate keys, missing header, ...)."""


class ReferentialError(DataError):
    """A record references an entity that does not exist."""


class EmptyVariogramError(DataError):
    """No point pair fell inside any variogram bin."""


class EmptyYearError(DataError):
    """A year has no active conflicts to model."""


class EmptySelectionError(DataError):
    """A filter matched zero records (distinct from empty input)."""


class ConnectivityError(DataError):
    """Network nodes cannot reach any point-of-sale."""

    def __init__(self, message: str, stranded: tuple[str, ...] = ()):
        super().__init__(message)
        self.stranded = stranded


class CoverageError(DataError):
    """A raster does not cover a location that must be evaluated."""


class AugmentationError(DataError):
    """A point-of-sale city is missing from the year's network."""


class ScoringError(DataError):
    """A validation score cannot be computed for the given inputs."""


class NumericalError(OriginsimError):
    """A numerical routine failed (singular system, divergence, ...)."""


class FitError(NumericalError):
    """Iterative fitting did not converge; carries the last iterate."""

    def __init__(self, message: str, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class SolverError(NumericalError):
    """An MDP solver failed to converge or detected divergence."""


class ModelError(DomainError):
    """An MDP model is structurally invalid."""


class NormalizationError(NumericalError):
    """A surface cannot be normalized into a probability density."""
