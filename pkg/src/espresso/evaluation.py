"""Metrics, piece-wise cross-validation, random baseline, and the
augmentation-by-PCA ablation grid.

Cross-validation holds out one piece at a time: the projection is fitted
on the core pairs of every other piece plus any enabled auxiliary pairs,
then every core description of the held-out piece is ranked within that
piece. Metrics are micro-averaged over all queries. Everything is
deterministic for a given seed, and reports serialize to stable bytes so
identical runs can be diffed directly.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass

import numpy as np

from .corpus import Catalog, DescriptionPair
from .errors import AllOovError, EvaluationError
from .numerics import TrainConfig, train_projection
from .retrieval import build_index, rank_performances
from .text_encoder import WordEmbeddingTable

_log = logging.getLogger(__name__)


@dataclass(frozen=True)
class QueryOutcome:
    """Where the true performance landed for one evaluated query."""

    piece_id: str
    performance_id: str
    rank_of_truth: int
    candidate_count: int

    def __post_init__(self):
        if not (1 <= self.rank_of_truth <= self.candidate_count):
            raise EvaluationError(
                f"rank {self.rank_of_truth} outside 1..{self.candidate_count}"
            )


def top_k_ratio(outcomes: list[QueryOutcome], k: int) -> float:
    """Fraction of queries whose true performance ranked k-th or better."""
    if not outcomes:
        raise EvaluationError("no outcomes to aggregate")
    if k < 1:
        raise EvaluationError(f"k must be >= 1, got {k}")
    hits = sum(1 for o in outcomes if o.rank_of_truth <= k)
    return hits / len(outcomes)


def mrr(outcomes: list[QueryOutcome]) -> float:
    """Mean reciprocal rank of the true performance."""
    if not outcomes:
        raise EvaluationError("no outcomes to aggregate")
    return sum(1.0 / o.rank_of_truth for o in outcomes) / len(outcomes)


@dataclass(frozen=True)
class EvalConfig:
    """One cell of the ablation grid plus protocol switches.

    ``ridge_lambda=None`` defers to the trainer's underdetermined-problem
    default; the resolved value is recorded per fold.
    """

    augment_pitchfork: bool = False
    augment_musiccaps: bool = False
    pca: bool = False
    pca_target: float | int = 0.95
    standardize: bool = True
    ridge_lambda: float | None = None
    seed: int = 0
    aggregate: str = "sum"
    allow_singleton: bool = False

    def to_train_config(self) -> TrainConfig:
        return TrainConfig(
            pca_target=self.pca_target if self.pca else None,
            ridge_lambda=self.ridge_lambda,
            standardize=self.standardize,
            aggregate=self.aggregate,
        )

    def describe(self) -> dict:
        return {
            "augment_pitchfork": self.augment_pitchfork,
            "augment_musiccaps": self.augment_musiccaps,
            "pca": self.pca,
            "standardize": self.standardize,
            "ridge_lambda": self.ridge_lambda,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class FoldResult:
    """Outcomes for one held-out piece."""

    piece_id: str
    outcomes: tuple[QueryOutcome, ...]
    skipped_queries: tuple[str, ...]
    ridge_lambda: float
    excluded_from_aggregate: bool = False


@dataclass(frozen=True)
class EvalReport:
    config: dict
    per_fold: tuple[FoldResult, ...]
    aggregate: dict
    query_set_hash: str

    def to_json(self) -> str:
        doc = {
            "config": self.config,
            "per_fold": [
                {
                    "piece_id": f.piece_id,
                    "outcomes": [
                        {
                            "piece_id": o.piece_id,
                            "performance_id": o.performance_id,
                            "rank_of_truth": o.rank_of_truth,
                            "candidate_count": o.candidate_count,
                        }
                        for o in f.outcomes
                    ],
                    "skipped_queries": list(f.skipped_queries),
                    "ridge_lambda": f.ridge_lambda,
                    "excluded_from_aggregate": f.excluded_from_aggregate,
                }
                for f in self.per_fold
            ],
            "aggregate": self.aggregate,
            "query_set_hash": self.query_set_hash,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _core_pairs(pairs: list[DescriptionPair], catalog: Catalog) -> list[DescriptionPair]:
    core = []
    for pair in pairs:
        if pair.source != "core":
            continue
        if not pair.piece_id or not pair.performance_id:
            raise EvaluationError("core pair missing piece_id/performance_id")
        perf = catalog.performance(pair.performance_id)
        if perf.piece_id != pair.piece_id:
            raise EvaluationError(
                f"core pair maps {pair.performance_id!r} to the wrong piece"
            )
        core.append(pair)
    return core


def query_set_hash(pairs: list[DescriptionPair], catalog: Catalog) -> str:
    """Hash of the full held-out query set, independent of config.

    Two configurations evaluate the same queries exactly when their hashes
    match; augmentation only ever changes the training side.
    """
    core = _core_pairs(pairs, catalog)
    keys = sorted((p.piece_id, p.performance_id, p.text) for p in core)
    payload = json.dumps(keys)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def run_piecewise_cv(
    catalog: Catalog,
    pairs: list[DescriptionPair],
    table: WordEmbeddingTable,
    config: EvalConfig = EvalConfig(),
) -> EvalReport:
    """Leave-one-piece-out evaluation of the full pipeline."""
    core = _core_pairs(pairs, catalog)
    covered = {p.piece_id for p in core}
    missing = [pid for pid in catalog.piece_ids() if pid not in covered]
    if missing:
        raise EvaluationError(f"pieces with no core pairs: {missing}")

    singletons = set(catalog.singleton_piece_ids)
    if singletons and not config.allow_singleton:
        raise EvaluationError(
            f"single-performance pieces {sorted(singletons)} cannot be "
            "meaningfully ranked; pass allow_singleton to include them "
            "outside the aggregate"
        )

    aux: list[DescriptionPair] = []
    enabled = set()
    if config.augment_pitchfork:
        enabled.add("pitchfork")
    if config.augment_musiccaps:
        enabled.add("musiccaps")
    aux = [p for p in pairs if p.source in enabled]

    folds: list[FoldResult] = []
    aggregate_outcomes: list[QueryOutcome] = []
    for fold_piece in sorted(catalog.piece_ids()):
        train_pairs = [p for p in core if p.piece_id != fold_piece] + aux
        model = train_projection(table, train_pairs, config.to_train_config())
        index = build_index(catalog, model)

        outcomes: list[QueryOutcome] = []
        skipped: list[str] = []
        for pair in core:
            if pair.piece_id != fold_piece:
                continue
            try:
                results = rank_performances(
                    index, model, table, fold_piece, pair.text
                )
            except AllOovError:
                skipped.append(pair.text)
                continue
            rank = next(
                r.rank for r in results if r.performance_id == pair.performance_id
            )
            outcomes.append(
                QueryOutcome(
                    piece_id=fold_piece,
                    performance_id=pair.performance_id,
                    rank_of_truth=rank,
                    candidate_count=len(results),
                )
            )
        if skipped:
            _log.warning(
                "fold %s: %d queries skipped (out of vocabulary)",
                fold_piece,
                len(skipped),
            )
        excluded = fold_piece in singletons
        folds.append(
            FoldResult(
                piece_id=fold_piece,
                outcomes=tuple(outcomes),
                skipped_queries=tuple(skipped),
                ridge_lambda=model.map.ridge_lambda,
                excluded_from_aggregate=excluded,
            )
        )
        if not excluded:
            aggregate_outcomes.extend(outcomes)

    if not aggregate_outcomes:
        raise EvaluationError("no evaluable queries after exclusions")
    aggregate = {
        "top1": top_k_ratio(aggregate_outcomes, 1),
        "top2": top_k_ratio(aggregate_outcomes, 2),
        "mrr": mrr(aggregate_outcomes),
        "query_count": len(aggregate_outcomes),
    }
    return EvalReport(
        config=config.describe(),
        per_fold=tuple(folds),
        aggregate=aggregate,
        query_set_hash=query_set_hash(pairs, catalog),
    )


def random_baseline(
    catalog: Catalog,
    trials: int,
    seed: int = 0,
    allow_singleton: bool = False,
) -> dict:
    """Expected metrics when the ranking is uniformly random.

    One query per performance; each trial draws the truth's rank uniformly
    from 1..K of its piece.
    """
    if trials < 1:
        raise EvaluationError(f"trials must be >= 1, got {trials}")
    candidate_counts = []
    singletons = set(catalog.singleton_piece_ids)
    for piece in catalog.pieces:
        if piece.piece_id in singletons and not allow_singleton:
            continue
        k = len(piece.performance_ids)
        candidate_counts.extend([k] * k)
    if not candidate_counts:
        raise EvaluationError("no eligible performances for the baseline")
    counts = np.array(candidate_counts, dtype=np.int64)
    rng = np.random.default_rng(seed)
    ranks = rng.integers(1, counts + 1, size=(trials, counts.size))
    return {
        "top1": float((ranks == 1).mean()),
        "top2": float((ranks <= 2).mean()),
        "mrr": float((1.0 / ranks).mean()),
    }


def default_grid(
    seed: int = 0,
    standardize: bool = True,
    ridge_lambda: float | None = None,
    pca_target: float | int = 0.95,
    allow_singleton: bool = False,
) -> list[EvalConfig]:
    """The eight augmentation-by-PCA cells, in the standard row order:
    PCA toggled innermost, then pitchfork, then musiccaps."""
    grid = []
    for pitchfork, musiccaps in ((False, False), (True, False), (False, True), (True, True)):
        for pca in (False, True):
            grid.append(
                EvalConfig(
                    augment_pitchfork=pitchfork,
                    augment_musiccaps=musiccaps,
                    pca=pca,
                    pca_target=pca_target,
                    standardize=standardize,
                    ridge_lambda=ridge_lambda,
                    seed=seed,
                    allow_singleton=allow_singleton,
                )
            )
    return grid


def run_ablation_grid(
    catalog: Catalog,
    pairs: list[DescriptionPair],
    table: WordEmbeddingTable,
    grid: list[EvalConfig],
) -> list[EvalReport]:
    """One cross-validation report per grid cell, in grid order."""
    if not grid:
        raise EvaluationError("empty config grid")
    return [run_piecewise_cv(catalog, pairs, table, config) for config in grid]


def _glyph(flag: bool) -> str:
    return "✓" if flag else "✗"


def render_grid_table(reports: list[EvalReport]) -> str:
    """Fixed-width text table of grid results, one row per report."""
    lines = [
        "Pitchfork  MusicCaps  PCA  Top-1  Top-2  MRR",
        "---------  ---------  ---  -----  -----  -----",
    ]
    for report in reports:
        cfg = report.config
        agg = report.aggregate
        lines.append(
            f"{_glyph(cfg['augment_pitchfork']):^9}  "
            f"{_glyph(cfg['augment_musiccaps']):^9}  "
            f"{_glyph(cfg['pca']):^3}  "
            f"{agg['top1']:.2f}   {agg['top2']:.2f}   {agg['mrr']:.2f}"
        )
    return "\n".join(lines) + "\n"


def render_grid_csv(reports: list[EvalReport]) -> str:
    """Flat machine-readable form of the same grid."""
    lines = [
        "augment_pitchfork,augment_musiccaps,pca,standardize,"
        "ridge_lambda,seed,top1,top2,mrr,n_queries"
    ]
    for report in reports:
        cfg = report.config
        agg = report.aggregate
        ridge = "" if cfg["ridge_lambda"] is None else repr(cfg["ridge_lambda"])
        lines.append(
            f"{str(cfg['augment_pitchfork']).lower()},"
            f"{str(cfg['augment_musiccaps']).lower()},"
            f"{str(cfg['pca']).lower()},"
            f"{str(cfg['standardize']).lower()},"
            f"{ridge},"
            f"{cfg['seed']},"
            f"{agg['top1']!r},{agg['top2']!r},{agg['mrr']!r},{agg['query_count']}"
        )
    return "\n".join(lines) + "\n"
