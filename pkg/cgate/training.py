"""
End-to-end training pipelines: dataset → encoder → model.
"""

from dataclasses import dataclass
from typing import Literal

import numpy as np
from pydantic import BaseModel, Field

from .evaluation.auc import bayes_auc, roc_auc
from .events.dataset import Dataset
from .events.labels import is_positive
from .events.types import FeatureBag, merged_features
from .features.encoder import DEFAULT_FOLDS, fit_encoder, transform_training
from .features.schema import FeatureSchema, default_schema
from .gbdt.model import Ensemble
from .gbdt.train import TrainConfig, train
from .hybrid.model import HybridConfig, HybridModel
from .hybrid.train import train_hybrid
from .logging import logger
from .scoring import Scorer

Task = Literal["trigger", "filter"]


@dataclass(frozen=True)
class TaskData:
    """Training records of one task: bags in the task's view with their labels."""

    task: Task
    bags: list[FeatureBag]
    contexts: list[str | None]
    labels: np.ndarray
    event_ids: list[str]


def task_data(dataset: Dataset, task: Task) -> TaskData:
    """Trigger rows are every event with a generation; filter rows are the shown generations."""
    if task not in ("trigger", "filter"):
        raise ValueError(f"unknown task {task!r}")
    bags, contexts, labels, ids = [], [], [], []
    for event, generation in dataset.pairs():
        if task == "filter" and not generation.outcome.shown:
            continue
        bags.append(event.trigger_features if task == "trigger" else merged_features(event, generation))
        contexts.append(event.context)
        labels.append(1 if is_positive(generation) else 0)
        ids.append(event.event_id)
    return TaskData(task=task, bags=bags, contexts=contexts, labels=np.array(labels, dtype=np.int64), event_ids=ids)


def _schema_for(dataset: Dataset, schema: FeatureSchema | None) -> FeatureSchema:
    return schema or dataset.schema or default_schema()


def _split_of(dataset: Dataset) -> str:
    return dataset.manifest.split if dataset.manifest is not None else "full"


def train_task(
    dataset: Dataset,
    task: Task = "trigger",
    config: TrainConfig | None = None,
    schema: FeatureSchema | None = None,
    folds: int = DEFAULT_FOLDS,
) -> Ensemble:
    """Fit the encoder and a boosted ensemble for ``task``.

    Raises:
        LeakageError: if the dataset is tagged as a test split.
        DegenerateLabelsError: if the task's rows carry a single class.
    """
    config = config or TrainConfig()
    data = task_data(dataset, task)
    schema = _schema_for(dataset, schema)
    encoder = fit_encoder(data.bags, data.labels, schema, folds, config.seed, split=_split_of(dataset))
    X = transform_training(data.bags, data.labels, encoder, task)
    logger.info(f"Training {task} ensemble on {X.shape[0]} rows x {X.shape[1]} features")
    return train(X, data.labels, config=config, encoder=encoder, view=task)


def train_hybrid_task(
    dataset: Dataset,
    task: Task = "trigger",
    config: HybridConfig | None = None,
    schema: FeatureSchema | None = None,
    folds: int = DEFAULT_FOLDS,
) -> HybridModel:
    """Fit the encoder and a hybrid context + tabular model for ``task``.

    Raises:
        ModalityError: if any row lacks a code context.
    """
    config = config or HybridConfig()
    data = task_data(dataset, task)
    schema = _schema_for(dataset, schema)
    encoder = fit_encoder(data.bags, data.labels, schema, folds, config.seed, split=_split_of(dataset))
    X = transform_training(data.bags, data.labels, encoder, task, impute=True)
    logger.info(f"Training hybrid {task} model on {X.shape[0]} rows")
    return train_hybrid(data.contexts, X, data.labels, config, encoder=encoder, view=task)


class TaskEvaluation(BaseModel):
    task: Task
    rows: int
    auc: float
    bayes_auc: float | None = Field(default=None, description="ceiling from the dataset's ground truth, if any")


def evaluate_task(model: Scorer, dataset: Dataset, task: Task | None = None) -> TaskEvaluation:
    """ROC AUC of ``model`` on the task's rows of ``dataset``.

    When the dataset carries ground truth, the expected AUC of ranking by the true
    probabilities is reported next to it.

    Raises:
        DegenerateLabelsError: if the rows carry a single class.
    """
    task = task or model.view
    data = task_data(dataset, task)
    scores = model.score_bags(data.bags, data.contexts)
    ceiling = None
    truth = dataset.ground_truth
    if truth and all(i in truth for i in data.event_ids):
        column = "accept_probability" if task == "trigger" else "accept_given_show"
        ceiling = bayes_auc([getattr(truth[i], column) for i in data.event_ids])
    return TaskEvaluation(task=task, rows=len(data.labels), auc=roc_auc(data.labels, scores), bayes_auc=ceiling)
