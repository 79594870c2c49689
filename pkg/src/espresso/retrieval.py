"""Per-piece ranking of performances against a projected text query.

The search space is always the set of performances of one chosen piece.
Each performance's feature vector is stored in the model's comparison
coordinates (standardized when the model standardizes, raw otherwise),
and a query is ranked by cosine similarity against those vectors.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .corpus import FEATURE_NAMES, Catalog, MidLevelVector
from .errors import IntegrityError, UnknownPieceError
from .numerics import ProjectionModel, Standardization, project_text
from .text_encoder import WordEmbeddingTable, encode_text

_log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RankedResult:
    """One performance's position in a query's ranking.

    ``zero_norm`` marks scores that were forced to 0.0 because one side of
    the cosine had no magnitude.
    """

    performance_id: str
    score: float
    rank: int
    predicted_profile: MidLevelVector
    performance_profile: MidLevelVector
    zero_norm: bool = False


@dataclass(frozen=True)
class RetrievalIndex:
    """Immutable per-piece table of performance vectors in comparison
    coordinates, tied to the model that produced those coordinates."""

    by_piece: dict[str, tuple[tuple[str, np.ndarray], ...]]
    standardization: Standardization | None
    model_fingerprint: str

    def piece_ids(self) -> tuple[str, ...]:
        return tuple(self.by_piece)

    def entries(self, piece_id: str) -> tuple[tuple[str, np.ndarray], ...]:
        try:
            return self.by_piece[piece_id]
        except KeyError:
            raise UnknownPieceError(piece_id) from None

    def piece_mean(self, piece_id: str) -> MidLevelVector:
        """Mean profile of the piece's performances, same coordinates."""
        vectors = np.vstack([vec for _, vec in self.entries(piece_id)])
        return MidLevelVector.from_values(vectors.mean(axis=0))


def build_index(catalog: Catalog, model: ProjectionModel) -> RetrievalIndex:
    """Transform every catalog feature vector into the model's comparison
    coordinates, grouped by piece and sorted by performance_id."""
    by_piece: dict[str, tuple[tuple[str, np.ndarray], ...]] = {}
    for piece in catalog.pieces:
        entries = []
        for perf in catalog.performances_of(piece.piece_id):
            vec = perf.features.as_array()
            if not np.all(np.isfinite(vec)):
                raise IntegrityError(
                    f"performance {perf.performance_id!r} has non-finite features"
                )
            if model.feature_standardization is not None:
                vec = model.feature_standardization.apply(vec)
            entries.append((perf.performance_id, vec))
        entries.sort(key=lambda item: item[0])
        by_piece[piece.piece_id] = tuple(entries)
    return RetrievalIndex(
        by_piece=by_piece,
        standardization=model.feature_standardization,
        model_fingerprint=model.config_fingerprint,
    )


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> tuple[float, bool]:
    """Cosine of the angle between a and b, clamped to [-1, 1].

    Returns (0.0, True) when either vector has zero norm, where the cosine
    is undefined.
    """
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0, True
    value = float(np.dot(a / norm_a, b / norm_b))
    return max(-1.0, min(1.0, value)), False


def rank_profile(
    index: RetrievalIndex, piece_id: str, profile: np.ndarray
) -> list[RankedResult]:
    """Rank a piece's performances against an already-projected profile."""
    profile = np.asarray(profile, dtype=np.float64)
    predicted = MidLevelVector.from_values(profile, context="projected query")
    scored = []
    for performance_id, vec in index.entries(piece_id):
        score, zero = cosine_similarity(profile, vec)
        scored.append((performance_id, score, zero, vec))
    scored.sort(key=lambda item: (-item[1], item[0]))
    results = []
    for rank, (performance_id, score, zero, vec) in enumerate(scored, start=1):
        if zero:
            _log.warning(
                "zero-norm vector for %s; score reported as 0.0", performance_id
            )
        results.append(
            RankedResult(
                performance_id=performance_id,
                score=score,
                rank=rank,
                predicted_profile=predicted,
                performance_profile=MidLevelVector.from_values(vec),
                zero_norm=zero,
            )
        )
    return results


def rank_performances(
    index: RetrievalIndex,
    model: ProjectionModel,
    table: WordEmbeddingTable,
    piece_id: str,
    text: str,
) -> list[RankedResult]:
    """Encode, project, and rank one query against one piece."""
    if index.model_fingerprint != model.config_fingerprint:
        raise IntegrityError(
            "index was built from a different model (fingerprint mismatch)"
        )
    index.entries(piece_id)
    embedding = encode_text(table, text, aggregate=model.aggregate)
    predicted = project_text(model, embedding)
    return rank_profile(index, piece_id, predicted.as_array())


def explain(result: RankedResult, piece_mean: MidLevelVector) -> dict[str, dict]:
    """Per-dimension view of where a result sits relative to its piece.

    Deviations are plain differences in comparison coordinates, so for a
    standardizing model they read as multiples of the training std.
    """
    record: dict[str, dict] = {}
    for name in FEATURE_NAMES:
        predicted = getattr(result.predicted_profile, name)
        actual = getattr(result.performance_profile, name)
        mean = getattr(piece_mean, name)
        record[name] = {
            "predicted": predicted,
            "performance": actual,
            "predicted_deviation": predicted - mean,
            "performance_deviation": actual - mean,
        }
    return record


def query_piece(
    catalog: Catalog,
    index: RetrievalIndex,
    model: ProjectionModel,
    table: WordEmbeddingTable,
    piece_id: str,
    text: str,
) -> dict:
    """Run one query end to end and shape the result document shared by
    the CLI's document output and the HTTP service."""
    catalog.piece(piece_id)
    if index.model_fingerprint != model.config_fingerprint:
        raise IntegrityError(
            "index was built from a different model (fingerprint mismatch)"
        )
    embedding = encode_text(table, text, aggregate=model.aggregate)
    predicted = project_text(model, embedding)
    results = rank_profile(index, piece_id, predicted.as_array())
    piece_mean = index.piece_mean(piece_id)

    notes: list[str] = []
    if any(r.zero_norm for r in results):
        notes.append("zero-norm vector encountered; affected scores are 0.0")

    records = []
    for r in results:
        perf = catalog.performance(r.performance_id)
        detail = explain(r, piece_mean)
        records.append(
            {
                "performance_id": r.performance_id,
                "artist_label": perf.artist_label,
                "score": r.score,
                "rank": r.rank,
                "predicted_profile": r.predicted_profile.to_dict(),
                "performance_profile": r.performance_profile.to_dict(),
                "deviations": {
                    name: {
                        "predicted": detail[name]["predicted_deviation"],
                        "performance": detail[name]["performance_deviation"],
                    }
                    for name in FEATURE_NAMES
                },
            }
        )
    return {
        "piece_id": piece_id,
        "query": text,
        "results": records,
        "warnings": {"oov_tokens": list(embedding.oov_tokens), "notes": notes},
    }
