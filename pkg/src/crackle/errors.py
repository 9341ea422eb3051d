"""Exception hierarchy shared by every stage of the pipeline."""


class CrackleError(Exception):
    """Base class for all library errors."""


class DataError(CrackleError):
    """Raised for bad input data; the CLI maps these to exit code 2."""


class EmptySignal(DataError, ValueError):
    pass


class InvalidSignal(DataError, ValueError):
    pass


class TooShort(DataError, ValueError):
    pass


class InvalidFrequency(CrackleError, ValueError):
    pass


class InvalidRange(CrackleError, ValueError):
    pass


class InvalidRatio(CrackleError, ValueError):
    pass


class ShapeError(CrackleError, ValueError):
    pass


class InvalidRate(CrackleError, ValueError):
    pass


class InvalidAlpha(CrackleError, ValueError):
    pass


class PlanMismatch(CrackleError, ValueError):
    pass


class EmptyDataset(DataError, ValueError):
    pass


class DegenerateDataset(DataError, ValueError):
    pass


class IncompatibleCheckpoint(DataError, ValueError):
    pass


class InvalidPolicy(CrackleError, ValueError):
    pass


class ComboMismatch(CrackleError, ValueError):
    pass


class ParseError(DataError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class AnnotationError(DataError, ValueError):
    pass


class UnsupportedFormat(DataError, ValueError):
    pass


class CorruptFile(DataError, ValueError):
    pass


class InsufficientSubjects(DataError, ValueError):
    pass


class EmptyEvaluation(DataError, ValueError):
    pass


class LeakageError(CrackleError, RuntimeError):
    """A subject used for training or validation reached the test set."""
