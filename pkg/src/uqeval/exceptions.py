"""Exception hierarchy shared by every module."""


class UQEvalError(ValueError):
    """Base class for all errors raised by uqeval."""


class EmptySet(UQEvalError):
    pass


class OutOfRange(UQEvalError):
    pass


class InconsistentLogits(UQEvalError):
    pass


class DegenerateClasses(UQEvalError):
    """A curve is undefined because one of the two classes is missing."""


class KindMismatch(UQEvalError):
    pass


class MTooLarge(UQEvalError):
    pass


class MissingLogits(UQEvalError):
    pass


class TooManyBins(UQEvalError):
    pass


class BadShape(UQEvalError):
    pass


class NTooSmall(UQEvalError):
    pass


class BadLevel(UQEvalError):
    pass


class BadParams(UQEvalError):
    pass


class DumpParseError(UQEvalError):
    """Raised while reading a prediction dump; carries the offending line."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
