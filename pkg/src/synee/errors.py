"""Exception types shared across the package."""


class SyneeError(Exception):
    """Base class for all package errors."""


class ParseError(SyneeError):
    """A corpus or schema line could not be parsed."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class SpanValidationError(SyneeError):
    """A gold span does not slice out of the sentence text as annotated."""


class SchemaError(SyneeError):
    """The event schema is malformed or violated."""


class AnnotationError(SyneeError):
    """A syntactic annotation violates its structural invariants."""


class TransportError(SyneeError):
    """An external annotator backend could not be reached or failed."""


class ConfigError(SyneeError):
    """A run configuration is invalid or incomplete."""


class TrainingError(SyneeError):
    """Training aborted, e.g. on a non-finite loss."""
