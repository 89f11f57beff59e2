"""Exception types shared across the package."""


class OcpikError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(OcpikError, ValueError):
    """Problem data with inconsistent or invalid dimensions."""


class InfeasibleBoundsError(OcpikError, ValueError):
    """An inequality row with lower bound above its upper bound."""


class DomainError(OcpikError, ValueError):
    """A quantity outside its required domain (e.g. nonpositive slack)."""


class EvaluationError(OcpikError, RuntimeError):
    """A user-supplied function produced a non-finite or invalid value.

    ``stage`` carries the offending stage index when known.
    """

    def __init__(self, message, stage=None):
        super().__init__(message if stage is None else f"stage {stage}: {message}")
        self.stage = stage


class RankDeficientError(OcpikError, RuntimeError):
    """Stagewise equality Jacobian lost row rank during elimination."""

    def __init__(self, message, stage=None):
        super().__init__(message if stage is None else f"stage {stage}: {message}")
        self.stage = stage


class SingularSystemError(OcpikError, RuntimeError):
    """Dense factorization hit an (almost) exactly singular pivot."""


class ApiMisuseError(OcpikError, RuntimeError):
    """An operation was called with objects that do not belong together."""


class UnknownProblemError(OcpikError, KeyError):
    """Requested benchmark name is not registered."""


class ConfigError(OcpikError, ValueError):
    """Malformed run configuration (file or command line)."""
