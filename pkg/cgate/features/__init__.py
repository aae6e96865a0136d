"""
Feature schema and encoding.
"""

from .schema import FeatureEntry, FeatureSchema, default_schema  # isort: skip
from .encoder import (
    IMPUTED_VALUE,
    QUANTILE_LEVELS,
    EncoderState,
    ScalarGrid,
    fit_encoder,
    fold_assignment,
    transform,
    transform_many,
    transform_training,
)

__all__ = [
    "FeatureEntry",
    "FeatureSchema",
    "default_schema",
    "EncoderState",
    "ScalarGrid",
    "IMPUTED_VALUE",
    "QUANTILE_LEVELS",
    "fit_encoder",
    "fold_assignment",
    "transform",
    "transform_many",
    "transform_training",
]
