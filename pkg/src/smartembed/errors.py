"""Exception types shared across the package."""

from __future__ import annotations


class SmartEmbedError(Exception):
    """Base class for every error raised by this package."""


class LexError(SmartEmbedError):
    """Illegal character or unterminated literal in the source text."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class ParseError(SmartEmbedError):
    """Malformed top-level structure (e.g. unbalanced braces)."""

    def __init__(self, message: str, line: int, span: tuple[int, int] | None = None):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.span = span if span is not None else (line, line)


class ContextError(SmartEmbedError):
    """A statement was serialized against a context that does not contain it."""


class EmptyCorpusError(SmartEmbedError):
    """No usable documents or contract files were supplied."""


class DegenerateVocabError(SmartEmbedError):
    """Every token in the training corpus fell below the minimum count."""


class EmptyDocumentError(SmartEmbedError):
    """A fragment embedding was requested for a document with no tokens."""


class EmptyContractError(SmartEmbedError):
    """Serializing the submitted source produced no tokens."""


class DimensionMismatchError(SmartEmbedError):
    """Vectors of different dimensions were combined or compared."""


class NonFiniteInputError(SmartEmbedError):
    """A vector with NaN or infinite entries reached the similarity metric."""


class FormatVersionMismatchError(SmartEmbedError):
    """A persisted artifact has an unknown magic or an unsupported version."""

    def __init__(self, message: str, found: object = None, supported: object = None):
        if found is not None and supported is not None:
            message = f"{message} (file has version {found}, this build supports {supported})"
        super().__init__(message)
        self.found = found
        self.supported = supported


class TruncatedFileError(SmartEmbedError, OSError):
    """A persisted artifact ended before all declared data was read."""


class NotVerifiedError(SmartEmbedError):
    """The explorer endpoint has no verified source for the address."""


class RateLimitError(SmartEmbedError):
    """The explorer endpoint kept rate-limiting past the retry budget."""


class NetworkError(SmartEmbedError):
    """The explorer endpoint could not be reached or answered garbage."""
