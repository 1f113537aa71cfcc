"""Exception types shared across the package."""


class MapfuncError(Exception):
    """Base class for all package errors."""


class ModelFileError(MapfuncError):
    """Raised on a malformed or invalid model specification file."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if field is not None:
            prefix += f"field '{field}': "
        super().__init__(prefix + message)


class KillingUnsupported(MapfuncError):
    """Operation requires an infinite-lifetime model (killing rate zero)."""


class NotConvergent(MapfuncError):
    """Operation requires a model whose exponential functional converges."""


class OneSidedSample(MapfuncError):
    """Sample has only one sign present where both are required."""


class PositiveDrift(MapfuncError):
    """Operation requires a strictly negative long-run drift."""


class SubcriticalityViolated(MapfuncError):
    """The regime Laplace exponent reaches the switching rate at the given argument."""


class WindowTooDeep(MapfuncError):
    """The requested survival window needs more samples than provided."""


class TooFewExceedances(MapfuncError):
    """Not enough tail observations for a stable estimate."""


class KOutOfRange(MapfuncError):
    """Order-statistic count outside the allowed range."""


class EmptySample(MapfuncError):
    """Empty sample where at least one observation is required."""


class NotOfTypeError(MapfuncError):
    """Model has no dominant strong-subexponential component."""


class EpsilonTooLarge(MapfuncError):
    """Drift margin too small for the series evaluation to terminate."""


class EpsilonOutOfRange(MapfuncError):
    """Excursion drift margin must lie strictly between 0 and -K."""


class LevelTooSmall(MapfuncError):
    """Excursion barrier level too small for the cascade to terminate."""
