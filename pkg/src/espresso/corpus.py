"""Data model and ingestion for pieces, performances, and description pairs.

Catalogs and pair sets are plain JSON documents with an explicit
``schema_version`` field. Loading is a pure function of file contents and
the returned objects are immutable, so they can be shared freely between
threads.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, IntegrityError, ParseError, UnknownPieceError
from .text_encoder import tokenize

_log = logging.getLogger(__name__)

SCHEMA_VERSION = 1

FEATURE_NAMES = (
    "melodiousness",
    "articulation",
    "rhythm_stability",
    "rhythm_complexity",
    "dissonance",
    "tonal_stability",
    "minorness",
    "onset_density",
)

FEATURE_COUNT = len(FEATURE_NAMES)

PAIR_SOURCES = ("core", "musiccaps", "pitchfork")


@dataclass(frozen=True)
class MidLevelVector:
    """Eight perceptual dimensions describing one performance.

    The first seven live on a rating scale; onset_density is onsets per
    second. Values must be finite. Non-negativity of onset_density is a
    property of ingested data, not of the type: vectors in standardized
    comparison coordinates legitimately go negative on every axis.
    """

    melodiousness: float
    articulation: float
    rhythm_stability: float
    rhythm_complexity: float
    dissonance: float
    tonal_stability: float
    minorness: float
    onset_density: float

    def __post_init__(self):
        for name in FEATURE_NAMES:
            if not math.isfinite(getattr(self, name)):
                raise IntegrityError(f"non-finite value for {name}")

    @classmethod
    def from_values(
        cls,
        values,
        *,
        context: str = "feature vector",
        ingested: bool = False,
    ) -> "MidLevelVector":
        """Build from any length-8 sequence of numbers.

        ``ingested=True`` additionally enforces onset_density >= 0, which
        holds for raw catalog data but not for model outputs.
        """
        values = list(values)
        if len(values) != FEATURE_COUNT:
            raise DimensionError(
                f"{context}: expected {FEATURE_COUNT} values, got {len(values)}"
            )
        try:
            floats = [float(v) for v in values]
        except (TypeError, ValueError) as exc:
            raise ParseError(f"{context}: {exc}") from exc
        vec = cls(*floats)
        if ingested and vec.onset_density < 0:
            raise IntegrityError(f"{context}: onset_density must be >= 0")
        return vec

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in FEATURE_NAMES], dtype=np.float64)

    def as_list(self) -> list[float]:
        return [getattr(self, name) for name in FEATURE_NAMES]

    def to_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in FEATURE_NAMES}


@dataclass(frozen=True)
class Performance:
    """One artist's recorded rendition of a piece."""

    performance_id: str
    piece_id: str
    artist_label: str
    features: MidLevelVector
    audio_path: str | None = None


@dataclass(frozen=True)
class Piece:
    """A composition grouping one or more performances."""

    piece_id: str
    title: str
    performance_ids: tuple[str, ...]

    def __post_init__(self):
        if not self.performance_ids:
            raise IntegrityError(f"piece {self.piece_id!r}: no performances listed")
        if len(set(self.performance_ids)) != len(self.performance_ids):
            raise IntegrityError(f"piece {self.piece_id!r}: duplicate performance ids")


@dataclass(frozen=True)
class DescriptionPair:
    """A free-text description with its target feature vector.

    Core pairs come from the retrieval corpus itself and must resolve to a
    catalog performance; auxiliary pairs (musiccaps, pitchfork) only carry
    text and precomputed target features.
    """

    text: str
    target_features: MidLevelVector
    source: str
    piece_id: str | None = None
    performance_id: str | None = None


@dataclass(frozen=True)
class Catalog:
    """All pieces and performances, cross-checked in both directions."""

    pieces: tuple[Piece, ...]
    performances: tuple[Performance, ...]

    def __post_init__(self):
        if not self.pieces:
            raise IntegrityError("catalog has no pieces")
        piece_by_id: dict[str, Piece] = {}
        for piece in self.pieces:
            if piece.piece_id in piece_by_id:
                raise IntegrityError(f"duplicate piece id {piece.piece_id!r}")
            piece_by_id[piece.piece_id] = piece
        performance_by_id: dict[str, Performance] = {}
        for perf in self.performances:
            if perf.performance_id in performance_by_id:
                raise IntegrityError(
                    f"duplicate performance id {perf.performance_id!r}"
                )
            performance_by_id[perf.performance_id] = perf
            if perf.piece_id not in piece_by_id:
                raise IntegrityError(
                    f"performance {perf.performance_id!r} references "
                    f"unknown piece {perf.piece_id!r}"
                )
        for piece in self.pieces:
            for pid in piece.performance_ids:
                perf = performance_by_id.get(pid)
                if perf is None:
                    raise IntegrityError(
                        f"piece {piece.piece_id!r} lists unknown performance {pid!r}"
                    )
                if perf.piece_id != piece.piece_id:
                    raise IntegrityError(
                        f"performance {pid!r} belongs to {perf.piece_id!r} "
                        f"but is listed under {piece.piece_id!r}"
                    )
        for perf in self.performances:
            if perf.performance_id not in piece_by_id[perf.piece_id].performance_ids:
                raise IntegrityError(
                    f"performance {perf.performance_id!r} is not listed by "
                    f"its piece {perf.piece_id!r}"
                )
        object.__setattr__(self, "_piece_by_id", piece_by_id)
        object.__setattr__(self, "_performance_by_id", performance_by_id)
        singletons = tuple(
            p.piece_id for p in self.pieces if len(p.performance_ids) == 1
        )
        object.__setattr__(self, "_singleton_piece_ids", singletons)
        if singletons:
            _log.warning(
                "catalog has single-performance pieces: %s", ", ".join(singletons)
            )

    @property
    def singleton_piece_ids(self) -> tuple[str, ...]:
        return self._singleton_piece_ids

    def piece(self, piece_id: str) -> Piece:
        try:
            return self._piece_by_id[piece_id]
        except KeyError:
            raise UnknownPieceError(piece_id) from None

    def performance(self, performance_id: str) -> Performance:
        try:
            return self._performance_by_id[performance_id]
        except KeyError:
            raise IntegrityError(f"unknown performance {performance_id!r}") from None

    def performances_of(self, piece_id: str) -> tuple[Performance, ...]:
        piece = self.piece(piece_id)
        return tuple(self.performance(pid) for pid in piece.performance_ids)

    def piece_ids(self) -> tuple[str, ...]:
        return tuple(p.piece_id for p in self.pieces)


def _load_document(path: Path) -> dict:
    try:
        with path.open("r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top level must be an object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ParseError(
            f"{path}: unsupported schema_version {version!r} "
            f"(expected {SCHEMA_VERSION})"
        )
    return doc


def _require(record: dict, key: str, context: str):
    if key not in record:
        raise ParseError(f"{context}: missing field {key!r}")
    return record[key]


def load_catalog(path: str | Path) -> Catalog:
    """Load and validate a catalog document."""
    path = Path(path)
    doc = _load_document(path)
    pieces = []
    for i, record in enumerate(doc.get("pieces", [])):
        context = f"{path}: pieces[{i}]"
        pieces.append(
            Piece(
                piece_id=str(_require(record, "piece_id", context)),
                title=str(_require(record, "title", context)),
                performance_ids=tuple(
                    str(p) for p in _require(record, "performance_ids", context)
                ),
            )
        )
    performances = []
    for i, record in enumerate(doc.get("performances", [])):
        context = f"{path}: performances[{i}]"
        features = MidLevelVector.from_values(
            _require(record, "features", context),
            context=context,
            ingested=True,
        )
        performances.append(
            Performance(
                performance_id=str(_require(record, "performance_id", context)),
                piece_id=str(_require(record, "piece_id", context)),
                artist_label=str(_require(record, "artist_label", context)),
                features=features,
                audio_path=record.get("audio_path"),
            )
        )
    return Catalog(pieces=tuple(pieces), performances=tuple(performances))


def save_catalog(catalog: Catalog, path: str | Path) -> None:
    """Write a catalog document that load_catalog reads back identically."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "pieces": [
            {
                "piece_id": p.piece_id,
                "title": p.title,
                "performance_ids": list(p.performance_ids),
            }
            for p in catalog.pieces
        ],
        "performances": [
            {
                "performance_id": perf.performance_id,
                "piece_id": perf.piece_id,
                "artist_label": perf.artist_label,
                "features": perf.features.as_list(),
                **({"audio_path": perf.audio_path} if perf.audio_path else {}),
            }
            for perf in catalog.performances
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_pairs(
    path: str | Path,
    allowed_sources: set[str] | frozenset[str] | tuple[str, ...],
    catalog: Catalog | None = None,
) -> list[DescriptionPair]:
    """Load description pairs, keeping only the allowed sources.

    Every record is validated regardless of the filter; core pairs are
    resolved against ``catalog`` when one is given. Order is preserved.
    """
    path = Path(path)
    allowed = set(allowed_sources)
    unknown = allowed - set(PAIR_SOURCES)
    if unknown:
        raise ValueError(f"unknown sources: {sorted(unknown)}")
    doc = _load_document(path)
    pairs: list[DescriptionPair] = []
    for i, record in enumerate(doc.get("pairs", [])):
        context = f"{path}: pairs[{i}]"
        text = str(_require(record, "text", context))
        if not tokenize(text):
            raise ParseError(f"{context}: text is empty after tokenization")
        source = _require(record, "source", context)
        if source not in PAIR_SOURCES:
            raise ParseError(f"{context}: unknown source {source!r}")
        target = MidLevelVector.from_values(
            _require(record, "target_features", context),
            context=context,
            ingested=True,
        )
        piece_id = record.get("piece_id")
        performance_id = record.get("performance_id")
        if source == "core":
            if not piece_id or not performance_id:
                raise IntegrityError(
                    f"{context}: core pairs need piece_id and performance_id"
                )
            if catalog is not None:
                perf = catalog.performance(str(performance_id))
                if perf.piece_id != piece_id:
                    raise IntegrityError(
                        f"{context}: performance {performance_id!r} does not "
                        f"belong to piece {piece_id!r}"
                    )
        pair = DescriptionPair(
            text=text,
            target_features=target,
            source=str(source),
            piece_id=str(piece_id) if piece_id is not None else None,
            performance_id=str(performance_id) if performance_id is not None else None,
        )
        if pair.source in allowed:
            pairs.append(pair)
    return pairs
