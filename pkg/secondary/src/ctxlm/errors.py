"""Exception types shared across the package."""


class CtxLmError(Exception):
    """Base class for all errors raised by this package."""


class BundleError(CtxLmError):
    """A bundle JSONL record is malformed.

    ``position`` is a human-readable locator, usually a line number.
    """

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at {position})"
        super().__init__(message)
        self.position = position


class VocabularyMiss(CtxLmError):
    """Input text contains a character the vocabulary does not cover."""

    def __init__(self, char, context=""):
        where = f" in {context}" if context else ""
        super().__init__(f"character {char!r} not in vocabulary{where}")
        self.char = char
        self.context = context


class MissingSumToken(CtxLmError):
    """An entity token sequence does not end with the [SUM] terminator."""

    def __init__(self, index):
        super().__init__(f"entity {index} does not end with [SUM]")
        self.index = index


class ShapeMismatch(CtxLmError):
    """Tensor shapes are inconsistent with the model configuration."""
