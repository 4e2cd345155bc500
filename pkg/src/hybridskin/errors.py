"""Exception types raised across the package."""


class SkinError(Exception):
    """Base class for all package-specific errors."""


class SelfIntersectionError(SkinError):
    """Offset or extruded surface intersects itself (strict mode only)."""


class PlacementError(SkinError):
    """No valid support location exists (keepouts cover the surface)."""


class SaturationError(SkinError):
    """Dart throwing could not place the requested number of sites."""


class CouplingGapError(SkinError):
    """Ring inner radius leaves less than the required gap around the mount."""


class DimensionError(SkinError):
    """Joint value count does not match the chain's joint count."""


class DomainError(SkinError):
    """Timestamp outside the trajectory or scene time domain."""


class UnknownSensorError(SkinError):
    """Frame references a sensor id with no mount on the chain."""


class DegenerateSignalError(SkinError):
    """Inactive signal has zero variance; SNR undefined."""


class InsufficientSamplesError(SkinError):
    """Not enough samples to evaluate the requested statistic."""


class CalibrationError(SkinError):
    """Interference calibration has no positive-variance solution."""
