"""Exception hierarchy shared across the engine.

Every failure surfaced to callers derives from ``LatteError`` so the CLI can
map error families to stable exit codes. File-format problems derive from
``FormatError``; everything else signals invalid data or configuration.
"""


class LatteError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(LatteError):
    """A byte stream or text file does not conform to its declared format."""


class BadMagicError(FormatError):
    """Stream does not start with the expected magic bytes."""


class UnsupportedVersionError(FormatError):
    """File declares a format version this reader does not understand."""


class TruncatedFileError(FormatError):
    """Stream ended before the declared payload was complete."""


class TrailingDataError(FormatError):
    """Stream contains bytes past the declared payload."""


class NonFiniteFloatError(FormatError):
    """A stored float decoded to NaN or infinity."""


class NormToleranceError(FormatError):
    """A stored embedding row's norm deviates from 1 beyond the ingestion gate."""


class MalformedLineError(FormatError):
    """A text-format line could not be parsed; carries the 1-based line number."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class DuplicateEntryError(FormatError):
    """The same logical key appeared twice in one file."""


class RecordValidationError(LatteError):
    """An embedded record violates a type invariant; names the record id."""


class RunValidationError(FormatError):
    """A run's per-query rank/score ordering invariants are violated."""


class DimensionMismatchError(LatteError):
    """Vectors or records of differing dimensionality were combined."""


class RoleMismatchError(LatteError):
    """A record with the wrong role was passed to a scoring operation."""


class EmptyKeptTokensError(LatteError):
    """A document has no tokens participating in scoring."""


class DuplicateDocumentIdError(LatteError):
    """Two documents with the same id were offered to an index build."""


class EmptyIndexError(LatteError):
    """A search was issued against an index with no documents."""


class MissingCentroidTableError(LatteError):
    """Pruned search requires an index built with centroids."""


class SearchError(LatteError):
    """A per-query failure inside a batch search; names the query id."""


class EvaluationError(LatteError):
    """A metric was applied to judgments it is undefined for."""


class ConfigError(LatteError):
    """Invalid configuration value or flag combination."""
