"""Exceptions shared across the package."""


class GuidewaveError(Exception):
    """Base class for package errors."""


class ConfigError(GuidewaveError):
    """Invalid experiment configuration; the message carries the field path."""


class SolveError(GuidewaveError):
    """A direct linear solve failed or left a large residual."""


class ConvergenceError(GuidewaveError):
    """An iterative estimator did not converge within its budget."""
