from __future__ import annotations


class MeanFieldDMLError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(MeanFieldDMLError, ValueError):
    """Invalid hyperparameters, config documents or command-line values."""


class ShapeError(MeanFieldDMLError, ValueError):
    """Array shapes, labels or norms incompatible with the requested operation."""


class DataError(MeanFieldDMLError):
    """Datasets or files that cannot be read or are inconsistent."""


class DatasetFormatError(DataError):
    """A dataset file failed to parse; the message names the row or byte offset."""


class CheckpointError(DataError):
    """Missing, truncated or corrupt checkpoint file."""


class StaleCacheError(MeanFieldDMLError):
    """A forward cache was used after the parameters it was computed from changed."""


class NumericalError(MeanFieldDMLError):
    """Non-finite values or a solver that failed to converge."""
