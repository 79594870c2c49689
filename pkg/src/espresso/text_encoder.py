"""Word-vector table parsing and bag-of-words text encoding.

A query is encoded by summing the embedding vectors of its tokens
element-wise. Tokens without an embedding are skipped silently; a query
whose tokens are all out of vocabulary cannot be encoded and raises
AllOovError.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import AllOovError, DimensionError, ParseError

_log = logging.getLogger(__name__)

# Tokens are maximal runs of letters, optionally joined by an internal
# apostrophe ("don't" stays one token, a leading or trailing quote does not).
_TOKEN_RE = re.compile(r"[^\W\d_]+(?:['’][^\W\d_]+)*")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on anything that is not part of a word.

    Order and duplicates are preserved; digits and punctuation never
    survive into tokens. May return an empty list.
    """
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class TextEmbedding:
    """An encoded query: the vector, how many tokens hit the vocabulary,
    and which tokens missed it (in order of first appearance)."""

    vector: np.ndarray
    token_count: int
    oov_tokens: tuple[str, ...] = ()


@dataclass
class WordEmbeddingTable:
    """Token to vector lookup with a fixed dimension."""

    dimension: int
    entries: dict[str, np.ndarray] = field(default_factory=dict)
    duplicate_count: int = 0

    def __contains__(self, token: str) -> bool:
        return token in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def vector(self, token: str) -> np.ndarray:
        return self.entries[token]


def _looks_like_header(parts: list[str]) -> bool:
    if len(parts) != 2:
        return False
    try:
        int(parts[0])
        int(parts[1])
    except ValueError:
        return False
    return True


def load_embedding_table(
    path: str | Path, expected_dimension: int | None = None
) -> WordEmbeddingTable:
    """Parse a line-oriented word-vector file: ``token v1 v2 ... vd``.

    The dimension is taken from the first data line (or checked against
    ``expected_dimension``). An optional leading ``N d`` count header is
    detected and skipped. Duplicate tokens keep their first vector and
    bump ``duplicate_count``.
    """
    path = Path(path)
    entries: dict[str, np.ndarray] = {}
    dimension: int | None = None
    duplicates = 0

    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            parts = raw.split()
            if not parts:
                continue
            if lineno == 1 and _looks_like_header(parts):
                continue
            token, values = parts[0], parts[1:]
            if not values:
                raise ParseError(f"{path}: line {lineno}: no vector values")
            try:
                vector = np.array([float(v) for v in values], dtype=np.float64)
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from exc
            if not np.all(np.isfinite(vector)):
                raise ParseError(f"{path}: line {lineno}: non-finite value")
            if dimension is None:
                dimension = len(vector)
                if expected_dimension is not None and dimension != expected_dimension:
                    raise DimensionError(
                        f"{path}: line {lineno}: dimension {dimension} "
                        f"does not match expected {expected_dimension}"
                    )
            elif len(vector) != dimension:
                raise DimensionError(
                    f"{path}: line {lineno}: expected {dimension} values, "
                    f"got {len(vector)}"
                )
            if token in entries:
                duplicates += 1
                continue
            entries[token] = vector

    if dimension is None:
        raise ParseError(f"{path}: no embedding entries found")
    if duplicates:
        _log.warning("%s: %d duplicate tokens ignored (first kept)", path, duplicates)
    return WordEmbeddingTable(dimension=dimension, entries=entries, duplicate_count=duplicates)


def save_embedding_table(table: WordEmbeddingTable, path: str | Path) -> None:
    """Write a table back out, one ``token v1 ... vd`` line per entry.

    Values are written with repr so a reload reproduces them bit for bit.
    """
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for token, vector in table.entries.items():
            fh.write(token + " " + " ".join(repr(float(v)) for v in vector) + "\n")


def encode_text(
    table: WordEmbeddingTable, text: str, aggregate: str = "sum"
) -> TextEmbedding:
    """Encode free text as the element-wise sum of its token embeddings.

    Every in-vocabulary token occurrence contributes (multiset semantics),
    so repeated words count twice. ``aggregate="mean"`` divides the sum by
    the in-vocabulary token count; the default is the plain sum.
    """
    if aggregate not in ("sum", "mean"):
        raise ValueError(f"aggregate must be 'sum' or 'mean', got {aggregate!r}")
    tokens = tokenize(text)
    vector = np.zeros(table.dimension, dtype=np.float64)
    count = 0
    oov: list[str] = []
    seen_oov: set[str] = set()
    for token in tokens:
        entry = table.entries.get(token)
        if entry is None:
            if token not in seen_oov:
                seen_oov.add(token)
                oov.append(token)
            continue
        vector += entry
        count += 1
    if count == 0:
        raise AllOovError(oov)
    if aggregate == "mean":
        vector = vector / count
    return TextEmbedding(vector=vector, token_count=count, oov_tokens=tuple(oov))
