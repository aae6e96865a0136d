"""
Model-agnostic scoring of datasets.

Both the boosted ensemble and the hybrid model satisfy ``Scorer``; everything downstream
(calibration, sweeps, replay, serving) only sees scores.
"""

import hashlib
import json
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np

from .events.dataset import Dataset
from .events.labels import is_positive
from .events.types import FeatureBag, Outcome, merged_features
from .exceptions import ArtifactError, ArtifactVersionError
from .gbdt import model as gbdt_model
from .hybrid import model as hybrid_model
from .logging import logger

# the top of the open score range, so a missing gate passes every threshold below 1
NO_MODEL_SCORE = 1.0 - gbdt_model.PROBABILITY_EPS


@runtime_checkable
class Scorer(Protocol):
    view: str
    schema_hash: str

    def score_bag(self, bag: FeatureBag, context: str | None = None) -> float: ...

    def score_bags(self, bags: Sequence[FeatureBag], contexts: Sequence[str | None] | None = None) -> np.ndarray: ...


def load_model(path: str | Path, schema_hash: str | None = None) -> Scorer:
    """Load a GBDT or hybrid artifact, dispatching on its ``format_version``."""
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ArtifactError(f"cannot read model {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ArtifactError(f"{path}: not JSON: {e}") from e
    if not isinstance(document, dict):
        raise ArtifactError(f"{path}: expected a JSON object")
    version = document.get("format_version")
    if version == gbdt_model.FORMAT_VERSION:
        return gbdt_model.parse(document, str(path), schema_hash)
    if version == hybrid_model.FORMAT_VERSION:
        return hybrid_model.parse_hybrid(document, str(path), schema_hash)
    raise ArtifactVersionError(f"{path}: unknown model format {version!r}")


def artifact_digest(path: str | Path) -> str:
    try:
        return hashlib.sha256(Path(path).read_bytes()).hexdigest()
    except OSError as e:
        raise ArtifactError(f"cannot read {path}: {e}") from e


@dataclass(frozen=True)
class ScoredDataset:
    """Columnar view of (event, generation) pairs with both gate scores.

    Row ``i`` is the ``i``-th event that has a generation, in dataset order.
    """

    event_ids: list[str]
    user_ids: np.ndarray
    trigger_scores: np.ndarray
    filter_scores: np.ndarray
    positive: np.ndarray
    shown: np.ndarray
    accepted: np.ndarray
    cancelled: np.ndarray
    compilable: np.ndarray
    completion_length: np.ndarray

    def __len__(self) -> int:
        return len(self.event_ids)

    @property
    def total_positives(self) -> int:
        return int(self.positive.sum())

    def subset(self, rows: np.ndarray) -> "ScoredDataset":
        rows = np.asarray(rows)
        index = np.arange(len(self))[rows]
        return ScoredDataset(
            event_ids=[self.event_ids[i] for i in index],
            user_ids=self.user_ids[rows],
            trigger_scores=self.trigger_scores[rows],
            filter_scores=self.filter_scores[rows],
            positive=self.positive[rows],
            shown=self.shown[rows],
            accepted=self.accepted[rows],
            cancelled=self.cancelled[rows],
            compilable=self.compilable[rows],
            completion_length=self.completion_length[rows],
        )

    @classmethod
    def from_arrays(
        cls,
        trigger_scores: Sequence[float],
        filter_scores: Sequence[float],
        outcomes: Sequence[Outcome | str],
        completion_length: Sequence[int] | None = None,
        compilable: Sequence[bool] | None = None,
        user_ids: Sequence[str] | None = None,
    ) -> "ScoredDataset":
        """Build a scored dataset directly from columns (fixtures, external scores)."""
        outcomes = [Outcome(o) for o in outcomes]
        n = len(outcomes)
        accepted = np.array([o is Outcome.ACCEPTED for o in outcomes], dtype=bool)
        return cls(
            event_ids=[f"e{i}" for i in range(n)],
            user_ids=np.array(list(user_ids) if user_ids is not None else ["u0"] * n, dtype=object),
            trigger_scores=np.asarray(trigger_scores, dtype=np.float64),
            filter_scores=np.asarray(filter_scores, dtype=np.float64),
            positive=accepted.copy(),
            shown=np.array([o.shown for o in outcomes], dtype=bool),
            accepted=accepted,
            cancelled=np.array([o is Outcome.EXPLICIT_CANCEL for o in outcomes], dtype=bool),
            compilable=np.asarray(compilable if compilable is not None else [True] * n, dtype=bool),
            completion_length=np.asarray(
                completion_length if completion_length is not None else [0] * n, dtype=np.int64
            ),
        )


def score_dataset(dataset: Dataset, trigger: Scorer | None = None, filter: Scorer | None = None) -> ScoredDataset:
    """Score every generation with both gates; a missing gate scores ``NO_MODEL_SCORE``."""
    pairs = list(dataset.pairs())
    events = [e for e, _ in pairs]
    generations = [g for _, g in pairs]
    contexts = [e.context for e in events]
    n = len(pairs)
    if trigger is not None and n:
        trigger_bags = [e.trigger_features for e in events]
        trigger_scores = np.asarray(trigger.score_bags(trigger_bags, contexts), dtype=np.float64)
    else:
        trigger_scores = np.full(n, NO_MODEL_SCORE)
    if filter is not None and n:
        bags = [merged_features(e, g) for e, g in pairs]
        filter_scores = np.asarray(filter.score_bags(bags, contexts), dtype=np.float64)
    else:
        filter_scores = np.full(n, NO_MODEL_SCORE)
    logger.debug(f"Scored {n} generations (trigger={trigger is not None}, filter={filter is not None})")
    return ScoredDataset(
        event_ids=[e.event_id for e in events],
        user_ids=np.array([e.user_id for e in events], dtype=object),
        trigger_scores=trigger_scores,
        filter_scores=filter_scores,
        positive=np.array([is_positive(g) for g in generations], dtype=bool),
        shown=np.array([g.outcome.shown for g in generations], dtype=bool),
        accepted=np.array([g.outcome is Outcome.ACCEPTED for g in generations], dtype=bool),
        cancelled=np.array([g.outcome is Outcome.EXPLICIT_CANCEL for g in generations], dtype=bool),
        compilable=np.array([g.compilable for g in generations], dtype=bool),
        completion_length=np.array([g.completion_length for g in generations], dtype=np.int64),
    )
