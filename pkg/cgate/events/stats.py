import math
from collections.abc import Iterable

from .labels import is_positive
from .types import DATA_FORMAT_VERSION, CompletionEvent, DatasetManifest, GenerationRecord


def imbalance(negatives: int, positives: int) -> float:
    """Negatives per positive; zero positives gives the infinite marker."""
    if positives == 0:
        return math.inf
    return negatives / positives


def label_counts(generations: Iterable[GenerationRecord]) -> dict[str, int]:
    """Positive/negative counts over all generations and over shown generations only."""
    counts = {"trigger_pos": 0, "trigger_neg": 0, "filter_pos": 0, "filter_neg": 0}
    for g in generations:
        positive = is_positive(g)
        counts["trigger_pos" if positive else "trigger_neg"] += 1
        if g.outcome.shown:
            counts["filter_pos" if positive else "filter_neg"] += 1
    return counts


def dataset_stats(
    events: Iterable[CompletionEvent],
    generations: Iterable[GenerationRecord],
    schema_hash: str = "",
    split: str = "full",
    collection_policy: str = "gates_off",
    generator: str | None = None,
) -> DatasetManifest:
    """Recompute the manifest of a dataset from its records.

    Trigger imbalance counts every generation (unshown ones are negatives); filter
    imbalance counts shown generations only.
    """
    events = list(events)
    generations = list(generations)
    counts = label_counts(generations)
    return DatasetManifest(
        version=DATA_FORMAT_VERSION,
        event_count=len(events),
        generation_count=len(generations),
        user_count=len({e.user_id for e in events}),
        label_imbalance_trigger=imbalance(counts["trigger_neg"], counts["trigger_pos"]),
        label_imbalance_filter=imbalance(counts["filter_neg"], counts["filter_pos"]),
        schema_hash=schema_hash,
        split=split,
        collection_policy=collection_policy,
        generator=generator,
    )
