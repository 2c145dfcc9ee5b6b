"""Probabilistic sentence embeddings: sample-based Gaussian estimation,
uncertainty-aware distances, and an evaluation battery with a deterministic
toy encoder and an optional remote encoder backend."""

from .core import (
    AnalogyQuad,
    CombinedEmbedding,
    DegenerateInputError,
    EvalDataset,
    LabeledSentence,
    ParseError,
    ProbEmbedding,
    ProtocolError,
    RankPool,
    SampleSet,
    ScoredPair,
    Sen2ProError,
    ServiceError,
    TheoryReport,
    TransportError,
    ValidationError,
)
from .embedding import DistanceConfig, alpha, combine, distance, feature_vector, similarity_score
from .encoder import EncoderConfig, build_weights, encode, encode_mc, tokenize
from .estimator import band, estimate, estimate_cov_sce, estimate_mean
from .pipeline import PipelineConfig, embed_corpus

__version__ = "0.1.0"

__all__ = [
    "AnalogyQuad",
    "CombinedEmbedding",
    "DegenerateInputError",
    "DistanceConfig",
    "EncoderConfig",
    "EvalDataset",
    "LabeledSentence",
    "ParseError",
    "PipelineConfig",
    "ProbEmbedding",
    "ProtocolError",
    "RankPool",
    "SampleSet",
    "ScoredPair",
    "Sen2ProError",
    "ServiceError",
    "TheoryReport",
    "TransportError",
    "ValidationError",
    "alpha",
    "band",
    "build_weights",
    "combine",
    "distance",
    "embed_corpus",
    "encode",
    "encode_mc",
    "estimate",
    "estimate_cov_sce",
    "estimate_mean",
    "feature_vector",
    "similarity_score",
    "tokenize",
    "__version__",
]
