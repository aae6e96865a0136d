"""
Hashed-token context encoder fused with an MLP over tabular features.
"""

from .model import (
    FORMAT_VERSION,
    Batch,
    EpochStats,
    HybridConfig,
    HybridModel,
    HybridNet,
    batch_loss,
    build_net,
    check_shapes,
    load_hybrid,
    parse_hybrid,
    predict_hybrid,
    predict_hybrid_many,
    save_hybrid,
)
from .tokenize import DEFAULT_VOCAB_BUCKETS, split_tokens, token_hash, tokenize_context
from .train import train_hybrid

__all__ = [
    "FORMAT_VERSION",
    "DEFAULT_VOCAB_BUCKETS",
    "Batch",
    "EpochStats",
    "HybridConfig",
    "HybridModel",
    "HybridNet",
    "batch_loss",
    "build_net",
    "check_shapes",
    "predict_hybrid",
    "predict_hybrid_many",
    "save_hybrid",
    "load_hybrid",
    "parse_hybrid",
    "split_tokens",
    "token_hash",
    "tokenize_context",
    "train_hybrid",
]
