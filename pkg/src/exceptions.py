from typing import Optional


class EvaluationError(Exception):
    """Base class for all errors raised by the evaluation toolkit."""


class ConfigError(EvaluationError):
    """Invalid option, option combination or unreadable input file."""


class AnnotationParseError(EvaluationError):
    """The annotation is not well-formed XML."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        location = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{location}")


class AnnotationFieldError(EvaluationError):
    """A required annotation field is missing, non-numeric or out of bounds."""

    def __init__(self, message: str, element: str):
        self.element = element
        super().__init__(f"{message}: <{element}>")


class DegenerateBoxError(EvaluationError, ValueError):
    """A box with zero or negative extent on some axis."""


class DetectionFormatError(EvaluationError):
    """A detection dump record could not be turned into a Detection."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        prefix = f"record {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")


class UnsortedPredictionsError(EvaluationError, ValueError):
    """Predictions passed to matching are not in non-increasing score order."""

    def __init__(self, message: str = "predictions not score-sorted"):
        super().__init__(message)
