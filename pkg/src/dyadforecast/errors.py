"""Exception hierarchy shared by every module.

The CLI maps the three top-level families to exit codes:
usage problems -> 1, data problems -> 2, numeric failures -> 3.
"""


class DyadError(Exception):
    """Base class for all package errors."""


class UsageError(DyadError):
    pass


class ContractError(DyadError, ValueError):
    """A caller broke an operation's precondition."""


class DimensionError(ContractError):
    pass


class DataError(DyadError, ValueError):
    pass


class ParseError(DataError):
    def __init__(self, message, record=None, field=None):
        self.record = record
        self.field = field
        where = []
        if record is not None:
            where.append(f"record {record}")
        if field is not None:
            where.append(f"field {field!r}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)


class NumericError(DyadError, ArithmeticError):
    pass


class NonFiniteError(NumericError):
    pass


class TrainingError(NumericError):
    def __init__(self, message, epoch=None, batch=None, param=None):
        self.epoch = epoch
        self.batch = batch
        self.param = param
        super().__init__(message)


class CheckpointError(DataError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CorruptCheckpointError(CheckpointError):
    pass


class ReportError(DataError):
    pass
