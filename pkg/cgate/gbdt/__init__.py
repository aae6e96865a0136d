"""
Histogram gradient-boosted decision trees for binary classification.
"""

from .binning import MAX_BINS, BinMapper
from .model import (
    FORMAT_VERSION,
    Ensemble,
    Tree,
    feature_importance,
    load,
    parse,
    predict_bag,
    predict_many,
    predict_proba,
    save,
    sigmoid,
)
from .train import TrainConfig, log_loss, train

__all__ = [
    "MAX_BINS",
    "BinMapper",
    "FORMAT_VERSION",
    "Ensemble",
    "Tree",
    "TrainConfig",
    "train",
    "log_loss",
    "predict_proba",
    "predict_many",
    "predict_bag",
    "feature_importance",
    "sigmoid",
    "save",
    "load",
    "parse",
]
