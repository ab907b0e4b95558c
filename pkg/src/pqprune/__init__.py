"""Top-K item scoring over product-quantised embeddings, exhaustive or pruned."""

from .builder import (
    InteractionMatrix,
    SyntheticWorkload,
    build_codebook_svd,
    gen_workload,
)
from .core import (
    Codebook,
    InputError,
    ScoringStats,
    TopKResult,
    dense_topk,
    pqtopk,
    precompute_sub_scores,
    reconstruct_embedding,
)
from .prune import (
    InflatedThreshold,
    InvertedIndexes,
    MaxIterations,
    PruneConfig,
    PruneTrace,
    Safe,
    build_inverted_indexes,
    merge,
    recjpqprune,
    upper_bound,
)
from .storage import (
    CorruptionError,
    FormatError,
    UnsupportedFormatError,
    load_codebook,
    load_workload,
    save_codebook,
    save_workload,
)

__all__ = [
    "Codebook",
    "CorruptionError",
    "FormatError",
    "InflatedThreshold",
    "InputError",
    "InteractionMatrix",
    "InvertedIndexes",
    "MaxIterations",
    "PruneConfig",
    "PruneTrace",
    "Safe",
    "ScoringStats",
    "SyntheticWorkload",
    "TopKResult",
    "UnsupportedFormatError",
    "build_codebook_svd",
    "build_inverted_indexes",
    "dense_topk",
    "gen_workload",
    "load_codebook",
    "load_workload",
    "merge",
    "pqtopk",
    "precompute_sub_scores",
    "recjpqprune",
    "reconstruct_embedding",
    "save_codebook",
    "save_workload",
    "upper_bound",
]
