"""Exception hierarchy shared across the toolkit."""

from __future__ import annotations


class FreqlensError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(FreqlensError):
    """An argument violates an operation's precondition."""


class InvalidConfigError(FreqlensError):
    """A configuration value is out of its allowed range or malformed."""


class SymmetryViolationError(FreqlensError):
    """A spectrum expected to be conjugate-symmetric produced a non-real image."""


class BackendIOError(FreqlensError):
    """An embedding backend failed to produce a result (I/O, timeout, protocol)."""


class MissingEmbeddingError(FreqlensError):
    """A precomputed store has no entry for the requested image."""


class PairListParseError(FreqlensError):
    """A pair-list CSV is malformed.

    ``line`` is the 1-based line number of the offending row.
    """

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


class ImageDecodeError(FreqlensError):
    """An image file could not be decoded."""


class ImageShapeError(FreqlensError):
    """A decoded image does not match the expected dimensions."""


class EmptyInputError(FreqlensError):
    """An aggregation received no data after filtering."""


class IncompatibleReportError(FreqlensError):
    """Two reports cannot be compared (group or band mismatch)."""


class PairProcessingError(FreqlensError):
    """Processing a verification pair failed; carries the pair id."""

    def __init__(self, message: str, pair_id: int | None = None):
        super().__init__(message)
        self.pair_id = pair_id
