"""Exception hierarchy shared across the package.

The CLI maps these onto stable exit codes: ConfigError -> 1, DataError and
ShapeError -> 2, NumericError -> 3.
"""


class LoadsrError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(LoadsrError):
    """Invalid configuration or command usage."""


class DataError(LoadsrError):
    """Problem with input data (files, schemas, splits, series content)."""


class IngestError(DataError):
    """CSV ingestion failure; message names the offending row(s)."""


class GapError(DataError):
    """Gap handling failed (fail policy hit a gap, or nothing survived)."""


class SplitError(DataError):
    """Train/test split cannot be built as requested."""


class SeriesTooShortError(DataError):
    """Series shorter than the minimum the operation needs."""


class ShapeError(LoadsrError):
    """Structural mismatch between array shapes or series geometry."""


class InvalidFactorError(ShapeError):
    """Upsampling factor is not an integer >= 2."""


class AllocationError(LoadsrError):
    """Allocation matrix violates the rows-sum-to-one contract."""


class NumericError(LoadsrError):
    """Non-finite values where finite ones are required."""


class TrainingDivergedError(NumericError):
    """Training loss became non-finite.

    Carries the last finite-loss parameter snapshot when one exists so
    callers can salvage it.
    """

    def __init__(self, message, last_good=None):
        super().__init__(message)
        self.last_good = last_good
