"""Exception types shared across the package.

Plain ``ValueError`` is used for ordinary input validation (shape and index
mismatches); the classes below mark failures that callers may want to handle
separately.
"""


class DomainError(ValueError):
    """A scalar function was evaluated outside its domain of definition."""


class NumericalError(RuntimeError):
    """An iteration failed numerically (non-convergence, NaN/Inf propagation)."""


class ParseError(ValueError):
    """A file could not be parsed; the message carries the offending line."""


class DiagnosticError(RuntimeError):
    """A finite-difference diagnostic hit an ill-conditioned configuration."""
