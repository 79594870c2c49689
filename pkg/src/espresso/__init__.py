"""Text-to-performance retrieval over an eight-dimensional perceptual
feature space.

Free-text descriptions are embedded word by word, projected onto the
feature space with a learned linear map, and ranked against a piece's
performances by cosine similarity.
"""

from .corpus import (
    FEATURE_COUNT,
    FEATURE_NAMES,
    Catalog,
    DescriptionPair,
    MidLevelVector,
    Performance,
    Piece,
    load_catalog,
    load_pairs,
    save_catalog,
)
from .errors import (
    AllOovError,
    AudioFormatError,
    ClipTooShortError,
    DimensionError,
    EspressoError,
    EvaluationError,
    IntegrityError,
    NumericsError,
    ParseError,
    UnknownPieceError,
)
from .numerics import (
    LinearMap,
    PcaTransform,
    ProjectionModel,
    Standardization,
    TrainConfig,
    apply_pca,
    fit_linear,
    fit_pca,
    load_model,
    project_text,
    save_model,
    train_projection,
)
from .audio_features import (
    AudioClip,
    OnsetConfig,
    OnsetComputeProvider,
    PassthroughProvider,
    decode_wav,
    onset_density,
    provide_features,
)
from .retrieval import (
    RankedResult,
    RetrievalIndex,
    build_index,
    cosine_similarity,
    explain,
    query_piece,
    rank_performances,
)
from .evaluation import (
    EvalConfig,
    EvalReport,
    QueryOutcome,
    default_grid,
    mrr,
    random_baseline,
    run_ablation_grid,
    run_piecewise_cv,
    top_k_ratio,
)
from .text_encoder import (
    TextEmbedding,
    WordEmbeddingTable,
    encode_text,
    load_embedding_table,
    save_embedding_table,
    tokenize,
)

__version__ = "0.1.0"
