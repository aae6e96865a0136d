"""
Feature schema: the ordered, versioned list of named features and the stage at
which each becomes available.

Trigger-stage entries come first and can be computed without any generation;
filter-stage entries describe the collected context, model execution and the
completion itself.
"""

import hashlib
import json
from importlib import resources
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, PrivateAttr, ValidationError, model_validator

from ..exceptions import DatasetIOError

FeatureKind = Literal["scalar", "categorical", "flag"]
Stage = Literal["trigger", "filter"]
View = Literal["trigger", "filter"]

DEFAULT_SCHEMA_RESOURCE = "default_schema.json"


class FeatureEntry(BaseModel):
    name: str
    kind: FeatureKind
    stage: Stage
    unit: str | None = None
    categories: list[str] | None = None
    description: str | None = None


class FeatureSchema(BaseModel):
    version: str
    entries: list[FeatureEntry]

    _hash: str | None = PrivateAttr(default=None)
    _index: dict[str, FeatureEntry] = PrivateAttr(default_factory=dict)

    @model_validator(mode="after")
    def _check_layout(self) -> "FeatureSchema":
        names = [e.name for e in self.entries]
        duplicates = sorted({n for n in names if names.count(n) > 1})
        if duplicates:
            raise ValueError(f"duplicate feature names: {duplicates}")
        seen_filter = False
        for entry in self.entries:
            if entry.stage == "filter":
                seen_filter = True
            elif seen_filter:
                raise ValueError(f"trigger feature {entry.name!r} declared after filter-stage features")
        return self

    def model_post_init(self, __context) -> None:
        self._index = {e.name: e for e in self.entries}

    def get(self, name: str) -> FeatureEntry | None:
        return self._index.get(name)

    def view_entries(self, view: View) -> list[FeatureEntry]:
        """Entries visible to a model stage; the filter view sees everything."""
        if view == "trigger":
            return [e for e in self.entries if e.stage == "trigger"]
        return list(self.entries)

    def view_names(self, view: View) -> list[str]:
        return [e.name for e in self.view_entries(view)]

    def canonical_json(self) -> str:
        """Sorted-key, whitespace-free rendering used for hashing."""
        return json.dumps(self.model_dump(mode="json", exclude_none=True), sort_keys=True, separators=(",", ":"))

    def schema_hash(self) -> str:
        if self._hash is None:
            self._hash = hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()
        return self._hash

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.model_dump_json(indent=2, exclude_none=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "FeatureSchema":
        try:
            return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))
        except UnicodeDecodeError as e:
            raise DatasetIOError(f"{path}: not UTF-8: {e}") from e
        except OSError as e:
            raise DatasetIOError(f"cannot read schema {path}: {e}") from e
        except ValidationError as e:
            raise DatasetIOError(f"{path}: not a valid feature schema: {e}") from e


def default_schema() -> FeatureSchema:
    """The desk-scale schema shipped with the package."""
    text = resources.files("cgate.features").joinpath(DEFAULT_SCHEMA_RESOURCE).read_text(encoding="utf-8")
    return FeatureSchema.model_validate_json(text)
