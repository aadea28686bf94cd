"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures onto
its documented codes: 2 usage, 3 data, 4 numerical.
"""


class SentistockError(Exception):
    exit_code = 1


class ConfigError(SentistockError, ValueError):
    exit_code = 2


class DataError(SentistockError, ValueError):
    exit_code = 3


class SchemaError(DataError):
    """A required CSV column is missing."""

    def __init__(self, column, path=None):
        where = f" in {path}" if path else ""
        super().__init__(f"missing column {column!r}{where}")
        self.column = column


class RowError(DataError):
    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DuplicateError(DataError):
    pass


class EmptyInputError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class ShapeError(SentistockError, ValueError):
    exit_code = 4


class CacheError(SentistockError):
    exit_code = 4


class CheckpointVersionError(DataError):
    pass


class NumericalError(SentistockError, ArithmeticError):
    exit_code = 4


class DivergenceError(NumericalError):
    def __init__(self, epoch, message="training loss became non-finite"):
        super().__init__(f"epoch {epoch}: {message}")
        self.epoch = epoch


class SearchFailureError(NumericalError):
    pass


class FitError(NumericalError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class DegenerateError(NumericalError):
    pass
