"""Exception hierarchy shared by every module of the package."""


class ManifoldStatError(Exception):
    """Base class for all package errors."""


class OnCutlocus(ManifoldStatError, ValueError):
    """The ambient point lies (numerically) on the cutlocus, so the
    nearest-point projection is undefined or degenerate."""


class InvalidPoint(ManifoldStatError, ValueError):
    """A point that should lie on the manifold does not."""


class ModeMismatch(ManifoldStatError, ValueError):
    """An operation was requested for a manifold kind that does not support it."""


class NotPSD(ManifoldStatError, ValueError):
    pass


class Singular(ManifoldStatError, ValueError):
    pass


class RankDeficient(ManifoldStatError, ValueError):
    pass


class EmptySample(ManifoldStatError, ValueError):
    pass


class TooFewRows(ManifoldStatError, ValueError):
    pass


class MaxIterations(ManifoldStatError, RuntimeError):
    pass


class DomainError(ManifoldStatError, ValueError):
    pass


class QuadratureFailure(ManifoldStatError, RuntimeError):
    def __init__(self, message, error_estimate=None):
        super().__init__(message)
        self.error_estimate = error_estimate


class FullCircle(ManifoldStatError, ValueError):
    """The confidence region covers the whole circle; no arc exists."""


class GeneratorFailure(ManifoldStatError, RuntimeError):
    pass


class ConfigError(ManifoldStatError, ValueError):
    pass


class CollinearWarning(UserWarning):
    """Observations lie on a straight line; the spatial median may not be unique."""
