"""Exception types shared across the package."""


class ContourTrackError(Exception):
    """Base class for all package errors."""


class DimensionError(ContourTrackError, ValueError):
    pass


class EmptyRegionError(ContourTrackError, ValueError):
    pass


class DegenerateMaskError(ContourTrackError, ValueError):
    """Raised when a mask (or level set) is empty or covers the whole frame."""


class ChannelMismatchError(ContourTrackError, ValueError):
    pass


class CFLViolationError(ContourTrackError, ValueError):
    pass


class BinCountMismatchError(ContourTrackError, ValueError):
    pass


class UnknownDesignError(ContourTrackError, KeyError):
    pass


class WeightArityError(ContourTrackError, ValueError):
    pass


class ShapeOutOfBoundsError(ContourTrackError, ValueError):
    pass


class ParameterOrderError(ContourTrackError, ValueError):
    pass
