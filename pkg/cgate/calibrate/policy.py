"""
Gate thresholds, hard rules and the ``policy.json`` artifact.
"""

import math
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from ..events.types import JsonFloat
from ..exceptions import ArtifactError, DatasetIOError
from ..logging import logger

NON_COMPILABLE = "non_compilable"


class HardRules(BaseModel):
    """Deterministic vetoes applied before the filter score."""

    block_non_compilable: bool = False

    def first_hit(self, compilable: bool) -> str | None:
        if self.block_non_compilable and not compilable:
            return NON_COMPILABLE
        return None


class PolicyProvenance(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="strings")

    trigger_model: str | None = Field(default=None, description="sha256 of the trigger artifact")
    filter_model: str | None = Field(default=None, description="sha256 of the filter artifact")
    target_fnr: float | None = None
    grid_pct: float | None = None
    realized_fnr: float | None = None


class ThresholdPolicy(BaseModel):
    """Trigger and filter thresholds; a score strictly below its threshold is blocked."""

    model_config = ConfigDict(ser_json_inf_nan="strings", frozen=True)

    trigger_threshold: JsonFloat = 0.0
    filter_threshold: JsonFloat = 0.0
    hard_rules: HardRules = Field(default_factory=HardRules)
    provenance: PolicyProvenance | None = None

    @field_validator("trigger_threshold", "filter_threshold")
    @classmethod
    def _unit_or_infinite(cls, value: float) -> float:
        if math.isnan(value) or not (math.isinf(value) or 0.0 <= value <= 1.0):
            raise ValueError(f"threshold must lie in [0, 1] or be infinite, got {value}")
        return value

    @classmethod
    def pass_all(cls) -> "ThresholdPolicy":
        return cls()

    def trigger_passes(self, score: float) -> bool:
        return score >= self.trigger_threshold

    def filter_decision(self, score: float, compilable: bool = True) -> tuple[bool, str | None]:
        """(passed, rule_hit); a rule hit blocks regardless of score."""
        rule = self.hard_rules.first_hit(compilable)
        if rule is not None:
            return False, rule
        return score >= self.filter_threshold, None


def save_policy(policy: ThresholdPolicy, path: str | Path) -> None:
    try:
        Path(path).write_text(policy.model_dump_json(indent=2, exclude_none=True) + "\n", encoding="utf-8")
    except OSError as e:
        raise DatasetIOError(f"cannot write policy {path}: {e}") from e
    logger.debug(f"Wrote policy to {path}")


def load_policy(path: str | Path) -> ThresholdPolicy:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise DatasetIOError(f"cannot read policy {path}: {e}") from e
    try:
        return ThresholdPolicy.model_validate_json(text)
    except ValidationError as e:
        raise ArtifactError(f"{path} is not a valid policy: {e}") from e
