"""Exception hierarchy shared by every estimator and the CLI."""


class RareLossError(Exception):
    """Base class for all package errors."""


class DomainError(RareLossError, ValueError):
    """An argument lies outside the domain of the operation."""


class ParameterError(RareLossError, ValueError):
    """Distribution or model parameters are invalid."""


class BracketError(RareLossError, ValueError):
    """The supplied bracket does not contain a sign change."""


class DegenerateError(RareLossError, ValueError):
    """Degenerate obligor, threshold or fit (zero spread, point mass)."""


class InfeasibleThresholdError(RareLossError, ValueError):
    """The loss threshold can never be exceeded (gamma >= total exposure)."""


class UnsupportedModelError(RareLossError, ValueError):
    """The estimator does not support the requested model variant."""


class ConfigError(RareLossError, ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


class ConvergenceError(RareLossError, RuntimeError):
    """An iterative procedure did not converge (CLI exit code 3).

    ``best`` carries the best iterate found, when there is one.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ScheduleError(ConvergenceError):
    """Adaptive level selection failed to produce a schedule."""


class ExplosionError(RareLossError, RuntimeError):
    """Fixed-factor splitting exceeded its path budget."""
