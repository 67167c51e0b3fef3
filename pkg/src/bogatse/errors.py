"""Exception types shared across the package."""


class BogatseError(Exception):
    """Base class for all package-specific errors."""


class DimMismatchError(BogatseError):
    """Operands live on different grids, or header dims disagree with data."""


class NonFiniteSampleError(BogatseError):
    """A volume holds NaN/Inf in a voxel that is not flagged invalid."""


class TruncatedPayloadError(BogatseError):
    """Raw payload is shorter than the header promises."""


class UnknownDtypeError(BogatseError):
    """Header declares a dtype this format does not define."""


class ZeroMeanProfileError(BogatseError):
    """Profile normalization is undefined for a zero-mean profile."""


class EmptyRegionError(BogatseError):
    """A region contains no valid voxels after validity filtering."""


class AlreadyScaledError(BogatseError):
    """The sqrt(2) CP-mode SNR scaling was already applied once."""


class ConventionAuditError(BogatseError):
    """No combination convention met the field-cancellation tolerance."""


class ConfigError(BogatseError):
    """Experiment configuration is missing or malformed; carries the key path."""
