"""
Dataset container and the on-disk JSON-lines layout.

A dataset directory holds ``events.jsonl``, ``generations.jsonl``, ``manifest.json``,
``schema.json`` and, for synthetic data, ``ground_truth.jsonl``.
"""

from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import TypeVar

from pydantic import BaseModel, ValidationError

from ..exceptions import DatasetIOError
from ..features.schema import FeatureSchema
from ..logging import logger
from .types import CompletionEvent, DatasetManifest, GenerationRecord, GroundTruthRecord

EVENTS_FILE = "events.jsonl"
GENERATIONS_FILE = "generations.jsonl"
GROUND_TRUTH_FILE = "ground_truth.jsonl"
MANIFEST_FILE = "manifest.json"
SCHEMA_FILE = "schema.json"

M = TypeVar("M", bound=BaseModel)


@dataclass(frozen=True)
class Dataset:
    """Events with their generations, plus optional manifest, schema and ground truth."""

    events: list[CompletionEvent]
    generations: list[GenerationRecord]
    manifest: DatasetManifest | None = None
    schema: FeatureSchema | None = None
    ground_truth: dict[str, GroundTruthRecord] = field(default_factory=dict)

    @cached_property
    def generation_by_event(self) -> dict[str, GenerationRecord]:
        return {g.event_id: g for g in self.generations}

    @cached_property
    def event_by_id(self) -> dict[str, CompletionEvent]:
        return {e.event_id: e for e in self.events}

    def users(self) -> list[str]:
        return sorted({e.user_id for e in self.events})

    def pairs(self) -> Iterator[tuple[CompletionEvent, GenerationRecord]]:
        """Events that have a generation, in event order."""
        by_event = self.generation_by_event
        for event in self.events:
            generation = by_event.get(event.event_id)
            if generation is not None:
                yield event, generation


def iter_jsonl(path: str | Path, model: type[M]) -> Iterator[M]:
    """Parse a JSON-lines file into models, one per non-blank line."""
    path = Path(path)
    try:
        with path.open(encoding="utf-8") as f:
            for line_no, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    yield model.model_validate_json(line)
                except ValidationError as e:
                    raise DatasetIOError(f"{path}:{line_no}: not a valid {model.__name__}: {e}") from e
    except UnicodeDecodeError as e:
        raise DatasetIOError(f"{path}: not UTF-8: {e}") from e
    except OSError as e:
        raise DatasetIOError(f"cannot read {path}: {e}") from e


def write_jsonl(path: str | Path, records: Iterable[BaseModel]) -> int:
    """Write models as JSON lines; returns the number of lines written."""
    count = 0
    try:
        with Path(path).open("w", encoding="utf-8", newline="\n") as f:
            for record in records:
                f.write(record.model_dump_json())
                f.write("\n")
                count += 1
    except OSError as e:
        raise DatasetIOError(f"cannot write {path}: {e}") from e
    return count


def read_manifest(path: str | Path) -> DatasetManifest:
    try:
        return DatasetManifest.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except UnicodeDecodeError as e:
        raise DatasetIOError(f"{path}: not UTF-8: {e}") from e
    except OSError as e:
        raise DatasetIOError(f"cannot read {path}: {e}") from e
    except ValidationError as e:
        raise DatasetIOError(f"{path}: not a valid manifest: {e}") from e


def load_dataset(directory: str | Path) -> Dataset:
    """Load a dataset directory written by ``save_dataset`` (or by hand in the same layout)."""
    directory = Path(directory)
    events = list(iter_jsonl(directory / EVENTS_FILE, CompletionEvent))
    generations = list(iter_jsonl(directory / GENERATIONS_FILE, GenerationRecord))
    manifest = read_manifest(directory / MANIFEST_FILE) if (directory / MANIFEST_FILE).exists() else None
    schema = FeatureSchema.load(directory / SCHEMA_FILE) if (directory / SCHEMA_FILE).exists() else None
    ground_truth: dict[str, GroundTruthRecord] = {}
    if (directory / GROUND_TRUTH_FILE).exists():
        ground_truth = {r.event_id: r for r in iter_jsonl(directory / GROUND_TRUTH_FILE, GroundTruthRecord)}
    logger.debug(f"Loaded dataset {directory}: {len(events)} events, {len(generations)} generations")
    return Dataset(events=events, generations=generations, manifest=manifest, schema=schema, ground_truth=ground_truth)


def save_dataset(dataset: Dataset, directory: str | Path) -> Path:
    """Write the dataset directory layout; existing files are overwritten."""
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise DatasetIOError(f"cannot create {directory}: {e}") from e

    write_jsonl(directory / EVENTS_FILE, dataset.events)
    write_jsonl(directory / GENERATIONS_FILE, dataset.generations)
    if dataset.ground_truth:
        write_jsonl(directory / GROUND_TRUTH_FILE, dataset.ground_truth.values())
    try:
        if dataset.manifest is not None:
            (directory / MANIFEST_FILE).write_text(dataset.manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
        if dataset.schema is not None:
            dataset.schema.save(directory / SCHEMA_FILE)
    except OSError as e:
        raise DatasetIOError(f"cannot write into {directory}: {e}") from e
    logger.info(f"Wrote dataset to {directory} ({len(dataset.events)} events)")
    return directory
