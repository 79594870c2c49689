"""PCA and least-squares fitting of the text-to-feature projection.

The projection maps a text embedding (optionally through PCA) onto the
eight perceptual feature dimensions with a linear model. Everything here
is deterministic: fixed algorithm order, a fixed sign convention for
principal components, and repr-based serialization, so identical inputs
produce bit-identical model files.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import FEATURE_COUNT, DescriptionPair, MidLevelVector
from .errors import DimensionError, IntegrityError, NumericsError, ParseError
from .text_encoder import AllOovError, TextEmbedding, WordEmbeddingTable, encode_text

_log = logging.getLogger(__name__)

MODEL_SCHEMA_VERSION = 1

# Ridge strength applied automatically when there are fewer training pairs
# than input dimensions (the plain problem would be underdetermined).
DEFAULT_UNDERDETERMINED_RIDGE = 1e-2

DEFAULT_PCA_VARIANCE_FRACTION = 0.95


@dataclass(frozen=True)
class PcaTransform:
    """Centered orthonormal projection onto the top principal directions.

    ``components`` rows are principal directions; the entry of largest
    magnitude in each row is positive so the decomposition is unique.
    """

    mean: np.ndarray
    components: np.ndarray
    explained_variance_ratio: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.components.shape[1]

    @property
    def output_dim(self) -> int:
        return self.components.shape[0]


@dataclass(frozen=True)
class LinearMap:
    """Affine map onto the eight feature dimensions: y = W x + b."""

    weights: np.ndarray
    bias: np.ndarray
    ridge_lambda: float

    def __post_init__(self):
        if self.weights.ndim != 2 or self.weights.shape[0] != FEATURE_COUNT:
            raise DimensionError(
                f"weights must be {FEATURE_COUNT} x k, got {self.weights.shape}"
            )
        if self.bias.shape != (FEATURE_COUNT,):
            raise DimensionError(f"bias must have length {FEATURE_COUNT}")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise IntegrityError("non-finite entries in linear map")
        if self.ridge_lambda < 0:
            raise NumericsError("ridge_lambda must be >= 0")

    @property
    def input_dim(self) -> int:
        return self.weights.shape[1]

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.weights @ x + self.bias


@dataclass(frozen=True)
class Standardization:
    """Per-dimension z-score transform fitted on training targets."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        if self.mean.shape != self.std.shape:
            raise DimensionError("standardization mean/std shape mismatch")
        if np.any(self.std <= 0):
            raise IntegrityError("standardization std entries must be > 0")

    def apply(self, values: np.ndarray) -> np.ndarray:
        return (values - self.mean) / self.std


@dataclass(frozen=True)
class ProjectionModel:
    """The trained text-to-feature projection, plus everything needed to
    compare predictions with catalog vectors in the same coordinates."""

    pca: PcaTransform | None
    map: LinearMap
    feature_standardization: Standardization | None
    config_fingerprint: str
    trained_on: dict[str, int]
    aggregate: str = "sum"

    def __post_init__(self):
        if self.aggregate not in ("sum", "mean"):
            raise ValueError(f"unknown aggregate mode {self.aggregate!r}")
        if self.pca is not None and self.pca.output_dim != self.map.input_dim:
            raise DimensionError(
                f"PCA outputs {self.pca.output_dim} dims but the linear map "
                f"expects {self.map.input_dim}"
            )

    @property
    def input_dim(self) -> int:
        return self.pca.input_dim if self.pca is not None else self.map.input_dim


def fit_pca(
    X: np.ndarray,
    component_count: int | None = None,
    variance_fraction: float | None = None,
) -> PcaTransform:
    """Fit PCA on the rows of X, keeping either a fixed number of
    components or the smallest number reaching a variance fraction.

    Either target is capped at min(d, n - 1). Directions come from an SVD
    of the centered data, which is the eigendecomposition of the sample
    covariance without ever forming it.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionError("X must be a 2-D matrix")
    n, d = X.shape
    if n < 2:
        raise NumericsError(f"PCA needs at least 2 rows, got {n}")
    if not np.all(np.isfinite(X)):
        raise IntegrityError("non-finite entries in PCA input")
    if (component_count is None) == (variance_fraction is None):
        raise ValueError("give exactly one of component_count, variance_fraction")
    if component_count is not None and component_count < 1:
        raise NumericsError(f"component_count must be >= 1, got {component_count}")
    if variance_fraction is not None and not (0.0 < variance_fraction <= 1.0):
        raise NumericsError(
            f"variance_fraction must be in (0, 1], got {variance_fraction}"
        )

    mean = X.mean(axis=0)
    centered = X - mean
    _, singular_values, vt = np.linalg.svd(centered, full_matrices=False)
    variances = singular_values**2 / (n - 1)
    total = variances.sum()
    if total <= 0.0:
        raise NumericsError("PCA input has zero variance")
    ratios = variances / total

    cap = min(d, n - 1)
    if component_count is not None:
        k = min(component_count, cap)
    else:
        cumulative = np.cumsum(ratios)
        k = int(np.searchsorted(cumulative, variance_fraction - 1e-12) + 1)
        k = min(k, cap)

    components = vt[:k].copy()
    # Fix the sign of each direction: largest-magnitude entry positive.
    for row in components:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1.0
    return PcaTransform(
        mean=mean,
        components=components,
        explained_variance_ratio=ratios[:k].copy(),
    )


def apply_pca(pca: PcaTransform, x: np.ndarray) -> np.ndarray:
    """Project a vector (or rows of a matrix) onto the principal directions."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != pca.input_dim:
        raise DimensionError(
            f"PCA expects dimension {pca.input_dim}, got {x.shape[-1]}"
        )
    return (x - pca.mean) @ pca.components.T


def _solve_least_squares(
    X: np.ndarray, Y: np.ndarray, ridge_lambda: float
) -> tuple[np.ndarray, np.ndarray]:
    """Minimize sum ||y_i - (W x_i + b)||^2 + lambda ||W||_F^2.

    The bias is never penalized, so the problem separates: center both
    sides, solve for W on the centered data, recover b from the means.
    An SVD handles both the ridge solution and, at lambda = 0, the
    minimum-norm solution of rank-deficient systems.
    """
    n = X.shape[0]
    x_mean = X.mean(axis=0)
    y_mean = Y.mean(axis=0)
    Xc = X - x_mean
    Yc = Y - y_mean

    u, s, vt = np.linalg.svd(Xc, full_matrices=False)
    if ridge_lambda > 0.0:
        factors = s / (s**2 + ridge_lambda)
    else:
        cutoff = max(X.shape) * np.finfo(np.float64).eps * (s[0] if s.size else 0.0)
        factors = np.zeros_like(s)
        keep = s > cutoff
        factors[keep] = 1.0 / s[keep]
    # W^T = V diag(factors) U^T Yc
    weights = (vt.T * factors) @ (u.T @ Yc)
    weights = weights.T
    bias = y_mean - weights @ x_mean
    return weights, bias


def fit_linear(X: np.ndarray, Y: np.ndarray, ridge_lambda: float = 0.0) -> LinearMap:
    """Least-squares fit of the affine map from inputs X (n x m) to the
    eight-dimensional targets Y (n x 8), with an unpenalized bias."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2:
        raise DimensionError("X and Y must be 2-D matrices")
    if X.shape[0] != Y.shape[0]:
        raise DimensionError(
            f"X has {X.shape[0]} rows but Y has {Y.shape[0]}"
        )
    if X.shape[0] < 1:
        raise NumericsError("need at least one sample")
    if Y.shape[1] != FEATURE_COUNT:
        raise DimensionError(f"Y must have {FEATURE_COUNT} columns")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise IntegrityError("non-finite entries in regression input")
    if ridge_lambda < 0:
        raise NumericsError("ridge_lambda must be >= 0")
    weights, bias = _solve_least_squares(X, Y, ridge_lambda)
    return LinearMap(weights=weights, bias=bias, ridge_lambda=float(ridge_lambda))


def project_text(model: ProjectionModel, embedding: TextEmbedding) -> MidLevelVector:
    """Map an encoded query into the feature space the model compares in.

    With feature standardization active the output is in standardized
    coordinates; catalog vectors must be standardized the same way before
    any similarity is computed.
    """
    x = np.asarray(embedding.vector, dtype=np.float64)
    if x.shape != (model.input_dim,):
        raise DimensionError(
            f"embedding has dimension {x.shape[-1]}, model expects {model.input_dim}"
        )
    if model.pca is not None:
        x = apply_pca(model.pca, x)
    return MidLevelVector.from_values(model.map.apply(x))


@dataclass(frozen=True)
class TrainConfig:
    """Knobs for fitting a projection model.

    ``pca_target`` is None (off), a fraction in (0, 1], or a component
    count. ``ridge_lambda=None`` picks 0 for overdetermined problems and a
    small default otherwise.
    """

    pca_target: float | int | None = DEFAULT_PCA_VARIANCE_FRACTION
    ridge_lambda: float | None = None
    standardize: bool = True
    aggregate: str = "sum"

    def describe(self) -> dict:
        return {
            "pca_target": self.pca_target,
            "ridge_lambda": self.ridge_lambda,
            "standardize": self.standardize,
            "aggregate": self.aggregate,
        }


def _fingerprint(config: TrainConfig, counts: dict[str, int], dimension: int) -> str:
    payload = json.dumps(
        {"config": config.describe(), "pairs": counts, "dimension": dimension},
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def encode_pairs(
    table: WordEmbeddingTable,
    pairs: list[DescriptionPair],
    aggregate: str = "sum",
) -> tuple[np.ndarray, np.ndarray, list[DescriptionPair], list[int]]:
    """Encode pair texts into an input matrix and stack their targets.

    Pairs whose text is entirely out of vocabulary cannot be used and are
    returned as a list of skipped indices.
    """
    rows: list[np.ndarray] = []
    targets: list[np.ndarray] = []
    used: list[DescriptionPair] = []
    skipped: list[int] = []
    for i, pair in enumerate(pairs):
        try:
            emb = encode_text(table, pair.text, aggregate=aggregate)
        except AllOovError:
            skipped.append(i)
            continue
        rows.append(emb.vector)
        targets.append(pair.target_features.as_array())
        used.append(pair)
    if not rows:
        raise IntegrityError(
            f"none of the {len(pairs)} training pairs could be encoded"
        )
    if skipped:
        _log.warning("skipped %d all-OOV training pairs", len(skipped))
    return np.vstack(rows), np.vstack(targets), used, skipped


def train_projection(
    table: WordEmbeddingTable,
    pairs: list[DescriptionPair],
    config: TrainConfig = TrainConfig(),
) -> ProjectionModel:
    """Fit the full projection on the given training pairs.

    Standardization statistics, the PCA basis, and the linear map are all
    fitted on exactly these pairs and nothing else.
    """
    X, Y, used, _ = encode_pairs(table, pairs, aggregate=config.aggregate)

    standardization = None
    if config.standardize:
        std = Y.std(axis=0, ddof=0)
        std = np.where(std > 0, std, 1.0)
        standardization = Standardization(mean=Y.mean(axis=0), std=std)
        Y = standardization.apply(Y)

    pca = None
    if config.pca_target is not None:
        if isinstance(config.pca_target, int) and not isinstance(config.pca_target, bool):
            pca = fit_pca(X, component_count=config.pca_target)
        else:
            pca = fit_pca(X, variance_fraction=float(config.pca_target))
        X = apply_pca(pca, X)

    ridge = config.ridge_lambda
    if ridge is None:
        ridge = DEFAULT_UNDERDETERMINED_RIDGE if X.shape[0] < X.shape[1] else 0.0
    linear = fit_linear(X, Y, ridge_lambda=ridge)

    counts: dict[str, int] = {}
    for pair in used:
        counts[pair.source] = counts.get(pair.source, 0) + 1
    return ProjectionModel(
        pca=pca,
        map=linear,
        feature_standardization=standardization,
        config_fingerprint=_fingerprint(config, counts, table.dimension),
        trained_on=counts,
        aggregate=config.aggregate,
    )


def save_model(model: ProjectionModel, path: str | Path) -> None:
    """Serialize a model to JSON with full float precision."""
    doc: dict = {"schema_version": MODEL_SCHEMA_VERSION}
    if model.pca is not None:
        doc["pca"] = {
            "mean": model.pca.mean.tolist(),
            "components": model.pca.components.tolist(),
            "explained_variance_ratio": model.pca.explained_variance_ratio.tolist(),
        }
    doc["map"] = {
        "weights": model.map.weights.tolist(),
        "bias": model.map.bias.tolist(),
        "ridge_lambda": model.map.ridge_lambda,
    }
    if model.feature_standardization is not None:
        doc["feature_standardization"] = {
            "mean": model.feature_standardization.mean.tolist(),
            "std": model.feature_standardization.std.tolist(),
        }
    doc["config_fingerprint"] = model.config_fingerprint
    doc["trained_on"] = model.trained_on
    doc["aggregate"] = model.aggregate
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> ProjectionModel:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise ParseError(f"{path}: unsupported model document")
    pca = None
    if "pca" in doc:
        block = doc["pca"]
        pca = PcaTransform(
            mean=np.asarray(block["mean"], dtype=np.float64),
            components=np.asarray(block["components"], dtype=np.float64),
            explained_variance_ratio=np.asarray(
                block["explained_variance_ratio"], dtype=np.float64
            ),
        )
    block = doc["map"]
    linear = LinearMap(
        weights=np.asarray(block["weights"], dtype=np.float64),
        bias=np.asarray(block["bias"], dtype=np.float64),
        ridge_lambda=float(block["ridge_lambda"]),
    )
    standardization = None
    if "feature_standardization" in doc:
        block = doc["feature_standardization"]
        standardization = Standardization(
            mean=np.asarray(block["mean"], dtype=np.float64),
            std=np.asarray(block["std"], dtype=np.float64),
        )
    return ProjectionModel(
        pca=pca,
        map=linear,
        feature_standardization=standardization,
        config_fingerprint=str(doc.get("config_fingerprint", "")),
        trained_on=dict(doc.get("trained_on", {})),
        aggregate=str(doc.get("aggregate", "sum")),
    )
