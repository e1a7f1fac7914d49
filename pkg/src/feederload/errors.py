"""Exception hierarchy shared across the package.

Everything raised on purpose derives from FeederLoadError so callers (and
the command-line tool) can catch one type and report a clean message.
"""

from __future__ import annotations

__all__ = [
    "FeederLoadError",
    "InvalidParameterError",
    "DomainError",
    "InsufficientDataError",
    "DegenerateDataError",
    "ConvergenceError",
    "SingularFitError",
    "TreeStructureError",
    "UnknownEdgeError",
    "SchemaError",
]


class FeederLoadError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameterError(FeederLoadError, ValueError):
    """A model parameter is outside its admissible range."""


class DomainError(FeederLoadError, ValueError):
    """A function argument lies outside the mathematical domain."""


class InsufficientDataError(FeederLoadError, ValueError):
    """Too few observations to perform the requested computation."""


class DegenerateDataError(FeederLoadError, ValueError):
    """Data carries no usable signal (empty, constant, or all-invalid)."""


class ConvergenceError(FeederLoadError, RuntimeError):
    """An iterative solver exhausted its budget before converging.

    Attributes
    ----------
    diagnostics : dict
        Solver state at failure (iteration count, last objective values,
        bracketing interval) to make failures debuggable.
    """

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class SingularFitError(FeederLoadError, ValueError):
    """A least-squares design matrix is rank deficient.

    Attributes
    ----------
    columns : tuple
        Names of the offending (dependent) columns, when identifiable.
    """

    def __init__(self, message: str, columns: tuple = ()):
        super().__init__(message)
        self.columns = tuple(columns)


class TreeStructureError(FeederLoadError, ValueError):
    """Edge list does not describe a rooted tree (cycle, orphan, dup edge)."""


class UnknownEdgeError(FeederLoadError, KeyError):
    """The queried edge does not exist in the tree."""


class SchemaError(FeederLoadError, ValueError):
    """A delimited or JSON input does not match the documented schema."""
