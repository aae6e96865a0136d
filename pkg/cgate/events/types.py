"""
Domain types for completion telemetry logs.

A completion opportunity (``CompletionEvent``) carries trigger-time features; the
counterfactual generation for it (``GenerationRecord``) carries filter-time features,
the completion itself and the logged user outcome.
"""

import math
from enum import StrEnum
from typing import Annotated, Literal

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, model_validator

DATA_FORMAT_VERSION = "cgate-data/1"


def _parse_infinity(value):
    if isinstance(value, str) and value.strip().lstrip("+-").lower() in ("inf", "infinity"):
        return -math.inf if value.strip().startswith("-") else math.inf
    return value


# floats whose infinities travel as "Infinity" / "-Infinity" strings in JSON
JsonFloat = Annotated[float, BeforeValidator(_parse_infinity)]


class Outcome(StrEnum):
    """Logged result of one generation."""

    NOT_SHOWN = "not_shown"
    ACCEPTED = "accepted"
    EXPLICIT_CANCEL = "explicit_cancel"  # escape key, mouse click or caret move
    IGNORED = "ignored"

    @property
    def shown(self) -> bool:
        return self is not Outcome.NOT_SHOWN


class Label(StrEnum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


class FeatureBag(BaseModel):
    """Per-event feature payload split by kind.

    ``None`` is the explicit missing marker; a name must appear in exactly one map.
    """

    model_config = ConfigDict(frozen=True)

    scalars: dict[str, float | None] = Field(default_factory=dict)
    categoricals: dict[str, str | None] = Field(default_factory=dict)
    flags: dict[str, bool | None] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _names_disjoint(self) -> "FeatureBag":
        seen: set[str] = set()
        for mapping in (self.scalars, self.categoricals, self.flags):
            overlap = seen.intersection(mapping)
            if overlap:
                raise ValueError(f"feature names present in more than one map: {sorted(overlap)}")
            seen.update(mapping)
        return self

    def names(self) -> set[str]:
        return set(self.scalars) | set(self.categoricals) | set(self.flags)

    def merged(self, other: "FeatureBag") -> "FeatureBag":
        """Union of two bags; a name defined in both keeps the value from ``other``."""
        scalars = {k: v for k, v in self.scalars.items() if k not in other.categoricals and k not in other.flags}
        categoricals = {k: v for k, v in self.categoricals.items() if k not in other.scalars and k not in other.flags}
        flags = {k: v for k, v in self.flags.items() if k not in other.scalars and k not in other.categoricals}
        return FeatureBag(
            scalars={**scalars, **other.scalars},
            categoricals={**categoricals, **other.categoricals},
            flags={**flags, **other.flags},
        )


class CompletionEvent(BaseModel):
    """One trigger opportunity."""

    model_config = ConfigDict(frozen=True)

    event_id: str
    user_id: str
    session_id: str
    timestamp: int = Field(description="milliseconds since epoch")
    language: str
    trigger_features: FeatureBag
    context: str | None = Field(default=None, description="code before the caret, when collected")


class GenerationRecord(BaseModel):
    """The counterfactual generated completion for an event."""

    model_config = ConfigDict(frozen=True)

    event_id: str
    completion_length: int = Field(ge=0, description="symbols; 0 iff the generation was empty")
    filter_features: FeatureBag
    compilable: bool
    outcome: Outcome

    @property
    def empty(self) -> bool:
        return self.completion_length == 0


class GroundTruthRecord(BaseModel):
    """Known acceptance probabilities of a synthetic event."""

    model_config = ConfigDict(frozen=True)

    event_id: str
    accept_probability: float
    show_probability: float
    accept_given_show: float


class DatasetManifest(BaseModel):
    """Summary of a dataset directory; counts and imbalances are recomputable from the data."""

    model_config = ConfigDict(ser_json_inf_nan="strings")

    version: str = DATA_FORMAT_VERSION
    event_count: int
    generation_count: int
    user_count: int
    label_imbalance_trigger: JsonFloat = Field(description="negatives per positive over all generations")
    label_imbalance_filter: JsonFloat = Field(description="negatives per positive over shown generations")
    schema_hash: str
    split: Literal["full", "train", "test"] = "full"
    collection_policy: Literal["gates_off", "active"] = "gates_off"
    generator: str | None = None


def merged_features(event: CompletionEvent, generation: GenerationRecord) -> FeatureBag:
    """Filter-view bag: the event's trigger features plus the generation's filter-only features."""
    return event.trigger_features.merged(generation.filter_features)
