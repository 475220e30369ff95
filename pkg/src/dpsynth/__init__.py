"""Differentially private synthetic token sequences.

Sensitive seed texts are clustered into homogeneous batches; each batch is
rewritten one token at a time by aggregating the per-seed next-token logits
with a clipped mean or clipped componentwise median and sampling from the
softmax of the aggregate. Every sampled token's privacy cost lands in an
auditable ledger, and the final guarantee is the maximum per-batch cost
plus the clustering charge.
"""

__version__ = "0.1.0"

from .aggregation import MedianTriple, aggregate_mean, aggregate_median, clip, median_triple
from .clustering import (
    Batch,
    BatchAssignment,
    ClusterModel,
    assign,
    assign_many,
    kmeans,
    plan_batches,
    rebalance,
    toy_embed,
)
from .engine import GenerationConfig, SyntheticExample, generate_all, generate_batch, sample_token
from .errors import (
    ConfigError,
    DataError,
    DpsynthError,
    EmptyBatchError,
    InvalidInputError,
)
from .lm import (
    BOS,
    EOS,
    NGramModel,
    ReplayProvider,
    SeedRecord,
    Vocabulary,
    detokenize,
    tokenize,
    train_ngram,
)
from .metrics import VMeasure, cluster_sizes, v_measure
from .privacy import (
    CostBounds,
    PerTokenCost,
    PrivacyLedger,
    PrivacyReport,
    build_report,
    mean_mode_token_cost,
    token_cost_bounds,
    triple_cost_bounds,
)

__all__ = [
    "__version__",
    "MedianTriple",
    "aggregate_mean",
    "aggregate_median",
    "clip",
    "median_triple",
    "Batch",
    "BatchAssignment",
    "ClusterModel",
    "assign",
    "assign_many",
    "kmeans",
    "plan_batches",
    "rebalance",
    "toy_embed",
    "GenerationConfig",
    "SyntheticExample",
    "generate_all",
    "generate_batch",
    "sample_token",
    "ConfigError",
    "DataError",
    "DpsynthError",
    "EmptyBatchError",
    "InvalidInputError",
    "BOS",
    "EOS",
    "NGramModel",
    "ReplayProvider",
    "SeedRecord",
    "Vocabulary",
    "detokenize",
    "tokenize",
    "train_ngram",
    "VMeasure",
    "cluster_sizes",
    "v_measure",
    "CostBounds",
    "PerTokenCost",
    "PrivacyLedger",
    "PrivacyReport",
    "build_report",
    "mean_mode_token_cost",
    "token_cost_bounds",
    "triple_cost_bounds",
]
