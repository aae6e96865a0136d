"""Completion telemetry: domain types, labels, dataset files, validation, splits and stats."""

from .types import (  # isort: skip
    DATA_FORMAT_VERSION,
    CompletionEvent,
    DatasetManifest,
    FeatureBag,
    GenerationRecord,
    GroundTruthRecord,
    JsonFloat,
    Label,
    Outcome,
    merged_features,
)
from .dataset import Dataset, iter_jsonl, load_dataset, save_dataset, write_jsonl
from .labels import is_positive, label_of
from .split import split_by_user
from .stats import dataset_stats, imbalance
from .validation import ValidationReport, Violation, validate_dataset, validate_dataset_dir

__all__ = [
    "DATA_FORMAT_VERSION",
    "CompletionEvent",
    "Dataset",
    "DatasetManifest",
    "FeatureBag",
    "GenerationRecord",
    "GroundTruthRecord",
    "JsonFloat",
    "Label",
    "Outcome",
    "ValidationReport",
    "Violation",
    "dataset_stats",
    "imbalance",
    "is_positive",
    "iter_jsonl",
    "label_of",
    "load_dataset",
    "merged_features",
    "save_dataset",
    "split_by_user",
    "validate_dataset",
    "validate_dataset_dir",
    "write_jsonl",
]
