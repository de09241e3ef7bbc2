class SpotlightError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(SpotlightError, ValueError):
    pass


class ConfigError(SpotlightError, ValueError):
    pass


class DataError(SpotlightError, ValueError):
    """Input data violates a dataset invariant (shape, finiteness, sign)."""


class UnsupportedMetadataError(SpotlightError, ValueError):
    pass


class NoFeasiblePointError(SpotlightError, RuntimeError):
    pass


class ShapeMismatchError(DataError):
    pass


class NonFiniteError(DataError):
    pass


class MetadataCountError(DataError):
    pass


class FormatError(DataError):
    """A file is not valid CSV / flat-binary / JSON Lines for its role."""
