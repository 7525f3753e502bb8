"""Exception hierarchy shared across the package."""


class RadReactError(Exception):
    """Base class for every error raised by radreact."""


class InvalidParameter(RadReactError, ValueError):
    pass


class NonPositiveMass(InvalidParameter):
    pass


class NegativeBareMass(InvalidParameter):
    pass


class NonFiniteInput(InvalidParameter):
    pass


class ConfigError(RadReactError, ValueError):
    pass


class PoleEvaluation(RadReactError, ArithmeticError):
    """Raised instead of returning inf when a response is evaluated on a pole."""

    def __init__(self, message, zeta=None):
        super().__init__(message)
        self.zeta = zeta


class WrongCutoff(InvalidParameter):
    pass


class UnsupportedFormFactor(RadReactError, ValueError):
    pass


class NegativeTime(InvalidParameter):
    pass


class InconsistentWavevector(InvalidParameter):
    pass


class ZeroRadius(InvalidParameter):
    pass


class InvalidGeometry(InvalidParameter):
    pass


class NotDilute(RadReactError, ValueError):
    pass


class NonRationalModel(RadReactError, ValueError):
    pass


class BandNotCovered(RadReactError, ValueError):
    pass


class InsufficientResolution(RadReactError, ValueError):
    pass


class StepTooLarge(InvalidParameter):
    pass


class UnsupportedOmega0(InvalidParameter):
    pass


class GridMismatch(RadReactError, ValueError):
    pass


class TooShort(RadReactError, ValueError):
    pass
