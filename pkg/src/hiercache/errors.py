"""Exception types shared across the engine."""


class EngineError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateInputError(EngineError, ValueError):
    """Input is structurally valid but numerically unusable.

    Examples: zero vector passed to a normalizer, empty patch set,
    non-finite coordinates, dropping every point of a cloud.
    """


class ShapeError(EngineError, ValueError):
    """Operand dimensions do not agree."""


class ParameterError(EngineError, ValueError):
    """A parameter lies outside its documented range."""


class ConsistencyError(EngineError, ValueError):
    """Paired records disagree (labels, sample ids, store coupling)."""


class FormatError(EngineError, ValueError):
    """A file failed validation.

    Carries the byte offset and record index of the failure when known.
    """

    def __init__(self, message: str, *, byte_offset: int | None = None,
                 record_index: int | None = None):
        detail = message
        if record_index is not None:
            detail += f" (record {record_index})"
        if byte_offset is not None:
            detail += f" (byte offset {byte_offset})"
        super().__init__(detail)
        self.byte_offset = byte_offset
        self.record_index = record_index
