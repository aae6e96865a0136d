import math
from collections.abc import Sequence
from fractions import Fraction

import numpy as np
from pydantic import BaseModel, Field, computed_field, model_validator

from ..exceptions import CalibrationError
from ..scoring import ScoredDataset
from .policy import ThresholdPolicy


def _exact(value: float) -> Fraction:
    # decimal literal semantics: 0.3 means 3/10, not its binary neighbour
    return Fraction(repr(float(value)))


class FnrBudget(BaseModel):
    """How many positives may be blocked at a target false-negative rate."""

    target_fnr: float = Field(ge=0.0, le=1.0)
    total_positives: int = Field(ge=0)

    @computed_field
    @property
    def allowed_fn(self) -> int:
        return math.floor(_exact(self.target_fnr) * self.total_positives)

    @model_validator(mode="after")
    def _within_total(self) -> "FnrBudget":
        if self.allowed_fn > self.total_positives:
            raise ValueError("allowed false negatives exceed the positives")
        return self


def threshold_for_count(scores: Sequence[float] | np.ndarray, allowed: int) -> float:
    """Largest threshold leaving at most ``allowed`` scores strictly below it."""
    values = np.sort(np.asarray(scores, dtype=np.float64))
    if allowed < 0:
        raise CalibrationError(f"negative false-negative allowance {allowed}")
    if allowed >= values.size:
        return math.inf
    return float(values[allowed])


def threshold_at_fnr(positive_scores: Sequence[float] | np.ndarray, target_fnr: float) -> float:
    """Largest threshold blocking at most ``floor(target_fnr * P)`` of the positives.

    Blocking is strictly-less, so scores tied at the threshold pass. The result is an
    observed score, or ``+inf`` when every positive may be blocked.

    Raises:
        CalibrationError: if there are no positive scores.
    """
    scores = np.asarray(positive_scores, dtype=np.float64)
    if scores.size == 0:
        raise CalibrationError("cannot calibrate a threshold without positive scores")
    budget = FnrBudget(target_fnr=target_fnr, total_positives=int(scores.size))
    return threshold_for_count(scores, budget.allowed_fn)


def percentile_threshold(scores: Sequence[float] | np.ndarray, grid_pct: float) -> float:
    """Threshold at the ``grid_pct``-th percentile: the score at sorted index ``floor(g * N / 100)``.

    With distinct scores exactly that many records fall strictly below it.
    """
    if not 0.0 <= grid_pct < 100.0:
        raise ValueError(f"grid percentage must lie in [0, 100), got {grid_pct}")
    values = np.sort(np.asarray(scores, dtype=np.float64))
    if values.size == 0:
        return -math.inf
    return float(values[math.floor(_exact(grid_pct) * values.size / 100)])


def rule_blocked(policy: ThresholdPolicy, scored: ScoredDataset) -> np.ndarray:
    if policy.hard_rules.block_non_compilable:
        return ~scored.compilable
    return np.zeros(len(scored), dtype=bool)


def combined_fnr(policy: ThresholdPolicy, scored: ScoredDataset) -> float:
    """Share of positives blocked by either gate.

    A positive counts once: as a trigger false negative when the trigger blocks it,
    otherwise as a filter false negative when a hard rule or the filter blocks it.

    Raises:
        CalibrationError: if the dataset holds no positives.
    """
    positives = scored.positive
    total = int(positives.sum())
    if total == 0:
        raise CalibrationError("combined FNR is undefined without positives")
    trigger_blocked = scored.trigger_scores < policy.trigger_threshold
    filter_blocked = rule_blocked(policy, scored) | (scored.filter_scores < policy.filter_threshold)
    trigger_fn = int(np.sum(positives & trigger_blocked))
    filter_fn = int(np.sum(positives & ~trigger_blocked & filter_blocked))
    return (trigger_fn + filter_fn) / total
