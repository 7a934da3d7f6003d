"""Exception hierarchy shared across the package."""


class ZTreeError(Exception):
    """Base class for every error raised by this package."""


class DataError(ZTreeError):
    """Unreadable, inconsistent, or empty input data."""


class SchemaError(DataError):
    """Bad schema declaration (unknown column, invalid kind, level mismatch)."""


class DegenerateSample(ZTreeError):
    """Test input with zero variance; carries no split evidence."""


class UnsupportedTest(ZTreeError):
    """Requested a test kind the framework does not define."""


class IncompatibleTest(ZTreeError):
    """Test kind does not match the target kind / treatment presence."""


class TooSmall(ZTreeError):
    """Dataset too small for the requested cross-validation layout."""


class RefusedLowerThreshold(ZTreeError):
    """Pruning below the threshold the tree was trained at is not defined."""


class ModelFormatError(ZTreeError):
    """Model document is malformed, versioned wrong, or violates invariants."""
