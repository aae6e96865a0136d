"""
Offline replay of a gating policy over gates-off telemetry.
"""

import numpy as np
from pydantic import BaseModel, Field

from ..calibrate.policy import ThresholdPolicy
from ..calibrate.thresholds import rule_blocked
from ..events.dataset import Dataset
from ..exceptions import ProvenanceError
from ..logging import logger
from ..scoring import ScoredDataset, Scorer, score_dataset


class MetricsReport(BaseModel):
    """Funnel metrics under a policy; rates are None when nothing was shown."""

    symbols_completed: int = Field(ge=0)
    shown: int = Field(ge=0)
    accepted: int = Field(ge=0)
    explicit_cancels: int = Field(ge=0)
    generations: int = Field(ge=0)
    accept_rate: float | None = None
    cancel_rate: float | None = None
    generations_filtered_pct: float = 0.0


def _report(total: int, generated: np.ndarray, shown: np.ndarray, scored: ScoredDataset) -> MetricsReport:
    accepted = shown & scored.accepted
    cancels = shown & scored.cancelled
    n_shown = int(shown.sum())
    n_generated = int(generated.sum())
    return MetricsReport(
        symbols_completed=int(scored.completion_length[accepted].sum()),
        shown=n_shown,
        accepted=int(accepted.sum()),
        explicit_cancels=int(cancels.sum()),
        generations=n_generated,
        accept_rate=int(accepted.sum()) / n_shown if n_shown else None,
        cancel_rate=int(cancels.sum()) / n_shown if n_shown else None,
        generations_filtered_pct=100.0 * (total - n_generated) / total if total else 0.0,
    )


def replay_scored(scored: ScoredDataset, policy: ThresholdPolicy) -> MetricsReport:
    """Metrics of ``policy`` on pre-scored generations.

    A generation is shown when the trigger passes, it was shown in the log, no hard
    rule fires and the filter passes. Accepts and cancels come from the log.
    """
    generated = scored.trigger_scores >= policy.trigger_threshold
    shown = (
        generated
        & scored.shown
        & ~rule_blocked(policy, scored)
        & (scored.filter_scores >= policy.filter_threshold)
    )
    return _report(len(scored), generated, shown, scored)


def raw_metrics(dataset: Dataset) -> MetricsReport:
    """Metrics of the log itself, with no gate applied."""
    scored = score_dataset(dataset)
    everything = np.ones(len(scored), dtype=bool)
    return _report(len(scored), everything, scored.shown.copy(), scored)


def check_provenance(dataset: Dataset) -> None:
    if dataset.manifest is not None and dataset.manifest.collection_policy != "gates_off":
        raise ProvenanceError(
            "dataset was collected under an active policy; its labels are biased for offline replay"
        )


def replay(
    dataset: Dataset,
    policy: ThresholdPolicy,
    trigger: Scorer | None = None,
    filter: Scorer | None = None,
) -> MetricsReport:
    """Replay ``policy`` over a gates-off dataset, treating events as independent.

    Raises:
        ProvenanceError: if the dataset was collected with gates active.
    """
    check_provenance(dataset)
    report = replay_scored(score_dataset(dataset, trigger, filter), policy)
    logger.debug(f"Replay: {report.shown} shown, {report.accepted} accepted, {report.symbols_completed} symbols")
    return report
