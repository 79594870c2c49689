"""Exception hierarchy shared across the package.

Every operational failure raised by this library derives from EspressoError,
so the CLI and the HTTP service can map errors to exit codes and response
envelopes in one place.
"""

from __future__ import annotations


class EspressoError(Exception):
    """Base class for all operational errors raised by this package."""


class ParseError(EspressoError):
    """A document or data file could not be parsed."""


class IntegrityError(EspressoError):
    """Parsed data violates a referential or value-level invariant."""


class DimensionError(EspressoError):
    """A vector or matrix has the wrong number of entries."""


class UnknownPieceError(EspressoError):
    """A piece id does not exist in the loaded catalog."""

    def __init__(self, piece_id: str):
        super().__init__(f"unknown piece: {piece_id!r}")
        self.piece_id = piece_id


class AllOovError(EspressoError):
    """No token of a query is in the embedding vocabulary."""

    def __init__(self, oov_tokens: list[str]):
        super().__init__(
            "no token of the query is in the embedding vocabulary: "
            + ", ".join(oov_tokens)
        )
        self.oov_tokens = list(oov_tokens)


class AudioFormatError(EspressoError):
    """An audio file is truncated, empty, or uses an unsupported encoding."""


class ClipTooShortError(EspressoError):
    """An audio clip is too short for onset analysis."""


class NumericsError(EspressoError):
    """Invalid input to a fitting routine (degenerate data, bad target)."""


class EvaluationError(EspressoError):
    """The evaluation protocol cannot be run on the given data."""
