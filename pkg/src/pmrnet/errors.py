"""Exception types shared across the package."""


class PMRNetError(Exception):
    """Base class for all package errors."""


class ConfigError(PMRNetError):
    """Malformed configuration file or unknown key."""


class RangeError(PMRNetError):
    """A configuration value or index is out of its valid range."""


class DivisibilityError(PMRNetError):
    """Input spatial size is not divisible by the required power of two."""


class ShapeError(PMRNetError):
    """Array shapes are incompatible for the requested operation."""


class OddSizeError(ShapeError):
    """Height or width must be even before 2x2 pooling."""


class MissingMaskError(PMRNetError):
    """An image file has no name-matched mask file."""


class DecodeError(PMRNetError):
    """An image file could not be decoded."""


class NonBinaryError(PMRNetError):
    """A mask contains values other than 0 and 1."""


class EmptyError(PMRNetError):
    """An aggregate was requested over zero elements."""


class DegenerateError(PMRNetError):
    """The metric is undefined for this input (e.g. single-class AUC)."""


class UnknownVariantError(PMRNetError):
    """Requested ablation variant name does not exist."""


class NaNLossError(PMRNetError):
    """Training loss became NaN or infinite."""
