"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operand dimensions do not conform."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


class DataError(ValueError):
    """Unusable input data (bad file, bad row, bad value)."""


class IntegrityError(DataError):
    """A stored artifact is corrupt or truncated."""


class VocabularyMismatchError(DataError):
    """Model and dataset were built against different vocabularies."""


class DivergenceError(RuntimeError):
    """Training produced non-finite values."""
