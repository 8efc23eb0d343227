"""Exception types raised by the library."""


class TightBellError(Exception):
    """Base class for library errors."""


class DimensionError(TightBellError, ValueError):
    """Operator or state dimensions do not fit together."""


class CapExceededError(TightBellError, ValueError):
    """A dense or exhaustive computation would exceed its configured size cap."""


class NotXorError(TightBellError, ValueError):
    """A full-correlation (XOR) tensor or connector was required."""


class CongruenceError(TightBellError, ValueError):
    """Two complexes cannot be congruently contracted."""

    def __init__(self, message, deviation=None):
        super().__init__(message)
        self.deviation = deviation


class ParameterError(TightBellError, ValueError):
    """Family parameters outside their valid domain."""


class NormalizationError(TightBellError, ValueError):
    """A functional exceeds its claimed quantum bound."""

    def __init__(self, message, attained=None):
        super().__init__(message)
        self.attained = attained
