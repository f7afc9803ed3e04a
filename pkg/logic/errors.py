"""
errors.py - Exception hierarchy shared by the workbench packages
"""


class WorkbenchError(Exception):
    """Base class for every error raised by the workbench"""


class DomainError(WorkbenchError, ValueError):
    """An operation was called outside its domain (bad angle, empty set, zero channel...)"""


class ConfigurationError(WorkbenchError, ValueError):
    """A configuration value is malformed, unknown or infeasible"""


class DatasetParseError(WorkbenchError):
    """A dataset, checkpoint or report file does not match its declared format"""

    def __init__(self, message, path=None, location=None):
        self.path = str(path) if path is not None else None
        self.location = location
        where = []
        if self.path:
            where.append(self.path)
        if location is not None:
            where.append(str(location))
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class FormatVersionError(DatasetParseError):
    """File was written by a newer major format version"""


class ModelStateError(WorkbenchError, RuntimeError):
    """Model used before it was fitted"""


class TrainingDivergedError(WorkbenchError, ArithmeticError):
    """Loss became non-finite during training"""

    def __init__(self, epoch, batch_index, loss):
        self.epoch = epoch
        self.batch_index = batch_index
        self.loss = loss
        super().__init__(
            f"Non-finite training loss {loss!r} at epoch {epoch}, batch {batch_index}"
        )
