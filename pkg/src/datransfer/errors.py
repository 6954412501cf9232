"""Exception types raised across the package."""


class DATransferError(Exception):
    """Base class for all package errors."""


class ParameterError(DATransferError, ValueError):
    pass


class DegenerateEffectiveSystem(DATransferError, ValueError):
    """Raised when the effective coupling v vanishes."""


class InvalidState(DATransferError, ValueError):
    pass


class NegativeFrequency(DATransferError, ValueError):
    pass


class NegativeTime(DATransferError, ValueError):
    pass


class DivergentLimit(DATransferError, ArithmeticError):
    """Tabulated data implies J(w)/w grows without bound as w -> 0."""


class InfraredDivergent(DATransferError, ArithmeticError):
    """A bath integral diverges at w -> 0 and no infrared cutoff was given."""


class QuadratureError(DATransferError, ArithmeticError):
    pass


class IndexOutOfRange(DATransferError, IndexError):
    pass


class DistributionInvalid(DATransferError, ValueError):
    pass


class DimensionTooLarge(DATransferError, ValueError):
    pass


class ConfigError(DATransferError, ValueError):
    """Scenario file problem; ``where`` names the offending field or line."""

    def __init__(self, message, where=None):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)
