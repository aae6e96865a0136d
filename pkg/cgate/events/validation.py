"""
Dataset validation.

Content problems are collected as violations rather than raised; only unreadable
input raises ``DatasetIOError``.
"""

import math
from collections.abc import Iterable
from pathlib import Path

from pydantic import BaseModel, Field

from ..features.schema import FeatureSchema
from .dataset import EVENTS_FILE, GENERATIONS_FILE, MANIFEST_FILE, SCHEMA_FILE, iter_jsonl, read_manifest
from .stats import imbalance, label_counts
from .types import CompletionEvent, DatasetManifest, FeatureBag, GenerationRecord


class Violation(BaseModel):
    kind: str
    message: str
    event_id: str | None = None


class ValidationReport(BaseModel):
    violations: list[Violation] = Field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> list[str]:
        return [v.kind for v in self.violations]


def _same(a: float, b: float) -> bool:
    if math.isinf(a) or math.isinf(b):
        return a == b
    return math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-12)


def _bag_violations(bag: FeatureBag, schema: FeatureSchema, stage: str, event_id: str) -> list[Violation]:
    found = []
    kinds = {"scalar": bag.scalars, "categorical": bag.categoricals, "flag": bag.flags}
    for kind, mapping in kinds.items():
        for name in mapping:
            entry = schema.get(name)
            if entry is None:
                found.append(Violation(kind="schema_mismatch", message=f"unknown feature {name!r}", event_id=event_id))
            elif entry.kind != kind:
                found.append(
                    Violation(
                        kind="schema_mismatch",
                        message=f"feature {name!r} declared {entry.kind} but logged as {kind}",
                        event_id=event_id,
                    )
                )
            elif entry.stage != stage:
                found.append(
                    Violation(
                        kind="schema_mismatch",
                        message=f"{entry.stage}-stage feature {name!r} found in {stage} features",
                        event_id=event_id,
                    )
                )
    return found


def validate_dataset(
    events: Iterable[CompletionEvent],
    generations: Iterable[GenerationRecord],
    manifest: DatasetManifest,
    schema: FeatureSchema | None = None,
) -> ValidationReport:
    """List every violation found in the dataset; an empty list means the dataset is valid."""
    events = list(events)
    generations = list(generations)
    violations: list[Violation] = []

    event_ids: set[str] = set()
    last_ts: dict[str, int] = {}
    for event in events:
        if event.event_id in event_ids:
            violations.append(
                Violation(kind="duplicate_event_id", message="event_id repeated", event_id=event.event_id)
            )
        event_ids.add(event.event_id)
        previous = last_ts.get(event.session_id)
        if previous is not None and event.timestamp < previous:
            violations.append(
                Violation(
                    kind="timestamp_order",
                    message=f"timestamp {event.timestamp} < {previous} within session {event.session_id}",
                    event_id=event.event_id,
                )
            )
        last_ts[event.session_id] = max(event.timestamp, previous if previous is not None else event.timestamp)
        if schema is not None:
            violations.extend(_bag_violations(event.trigger_features, schema, "trigger", event.event_id))

    generated: set[str] = set()
    for g in generations:
        if g.event_id not in event_ids:
            violations.append(
                Violation(kind="dangling_reference", message="generation references unknown event", event_id=g.event_id)
            )
        if g.event_id in generated:
            violations.append(
                Violation(kind="duplicate_generation", message="more than one generation", event_id=g.event_id)
            )
        generated.add(g.event_id)
        if g.empty and g.outcome.shown:
            violations.append(
                Violation(
                    kind="empty_generation_shown", message="empty generation logged as shown", event_id=g.event_id
                )
            )
        if schema is not None:
            violations.extend(_bag_violations(g.filter_features, schema, "filter", g.event_id))

    counts = {
        "event_count": len(events),
        "generation_count": len(generations),
        "user_count": len({e.user_id for e in events}),
    }
    for name, actual in counts.items():
        declared = getattr(manifest, name)
        if declared != actual:
            message = f"{name}: manifest {declared} but data {actual}"
            violations.append(Violation(kind="count_mismatch", message=message))

    labels = label_counts(generations)
    imbalances = {
        "label_imbalance_trigger": imbalance(labels["trigger_neg"], labels["trigger_pos"]),
        "label_imbalance_filter": imbalance(labels["filter_neg"], labels["filter_pos"]),
    }
    for name, actual in imbalances.items():
        declared = getattr(manifest, name)
        if not _same(declared, actual):
            violations.append(
                Violation(kind="imbalance_mismatch", message=f"{name}: manifest {declared} but data {actual}")
            )

    if schema is not None and manifest.schema_hash != schema.schema_hash():
        violations.append(
            Violation(
                kind="schema_hash_mismatch",
                message=f"manifest schema_hash {manifest.schema_hash} but schema hashes to {schema.schema_hash()}",
            )
        )

    return ValidationReport(violations=violations)


def validate_dataset_dir(directory: str | Path, schema: FeatureSchema | None = None) -> ValidationReport:
    """Validate a dataset directory; uses its ``schema.json`` when no schema is given."""
    directory = Path(directory)
    if schema is None and (directory / SCHEMA_FILE).exists():
        schema = FeatureSchema.load(directory / SCHEMA_FILE)
    return validate_dataset(
        iter_jsonl(directory / EVENTS_FILE, CompletionEvent),
        iter_jsonl(directory / GENERATIONS_FILE, GenerationRecord),
        read_manifest(directory / MANIFEST_FILE),
        schema,
    )
