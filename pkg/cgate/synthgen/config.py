"""
World configuration for the synthetic telemetry generator (``world.json``).
"""

import math

from pydantic import BaseModel, Field, model_validator

# log-odds contributions per unit of each feature's standardized effect
DEFAULT_EFFECTS: dict[str, float] = {
    "typing_speed": -0.3,
    "ms_since_last_keystroke": 0.25,
    "prefix_length": 0.15,
    "caret_column": -0.1,
    "session_accept_count": 0.2,
    "syntactic_node_kind": 0.8,
    "last_editor_action": 0.6,
    "in_comment": -0.6,
    "after_member_access": 0.4,
    "caret_at_line_end": 0.3,
    "mean_token_logprob": 0.9,
    "completion_length": -0.25,
    "repeats_suffix": -1.5,
}


class BehaviorProfile(BaseModel):
    """One population of simulated developers."""

    name: str = "default"
    base_accept_rate: float = Field(default=0.31, gt=0.0, lt=1.0, description="accepted per shown completion")
    cancel_propensity: float = Field(default=0.35, gt=0.0, lt=1.0, description="explicit cancels per rejected show")
    typing_speed_mean: float = Field(default=5.0, gt=0.0, description="chars/sec")
    typing_speed_std: float = Field(default=1.5, ge=0.0)
    session_length_mean: float = Field(default=40.0, ge=1.0, description="opportunities per session")
    feature_effect_weights: dict[str, float] = Field(default_factory=lambda: dict(DEFAULT_EFFECTS))
    context_signal_strength: float = Field(default=1.0, ge=0.0)
    user_intercept_std: float = Field(default=0.5, ge=0.0)


class ProfileShare(BaseModel):
    profile: BehaviorProfile = Field(default_factory=BehaviorProfile)
    weight: float = Field(default=1.0, gt=0.0, le=1.0)


class LanguageShare(BaseModel):
    name: str
    weight: float = Field(gt=0.0, le=1.0)


class DependenceModel(BaseModel):
    """Feedback from blocked completions to later opportunities."""

    enabled: bool = False
    opportunity_boost: float = Field(default=0.36, ge=0.0, description="expected extra opportunities per block")


def _default_languages() -> list[LanguageShare]:
    return [
        LanguageShare(name="kotlin", weight=0.3),
        LanguageShare(name="python", weight=0.3),
        LanguageShare(name="java", weight=0.2),
        LanguageShare(name="csharp", weight=0.1),
        LanguageShare(name="php", weight=0.1),
    ]


class WorldConfig(BaseModel):
    user_count: int = Field(default=224, ge=0)
    profiles: list[ProfileShare] = Field(default_factory=lambda: [ProfileShare()])
    languages: list[LanguageShare] = Field(default_factory=_default_languages)
    dependence: DependenceModel = Field(default_factory=DependenceModel)
    seed: int = Field(default=0, ge=0, lt=2**64)
    sessions_per_user: float = Field(default=3.0, ge=1.0)
    show_rate: float = Field(default=0.31, gt=0.0, lt=1.0, description="shown per generation")
    empty_rate: float = Field(default=0.03, ge=0.0, lt=1.0)
    non_compilable_rate: float = Field(default=0.06, ge=0.0, lt=1.0)
    missing_rate: float = Field(default=0.02, ge=0.0, lt=1.0)
    context_tokens: int = Field(default=16, ge=1)
    signal_vocabulary: int = Field(default=64, ge=1)
    noise_vocabulary: int = Field(default=2000, ge=1)
    start_timestamp: int = 1_700_000_000_000

    @model_validator(mode="after")
    def _weights_sum_to_one(self) -> "WorldConfig":
        for label, shares in (("profiles", self.profiles), ("languages", self.languages)):
            if not shares:
                raise ValueError(f"{label} must not be empty")
            total = math.fsum(s.weight for s in shares)
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"{label} weights sum to {total}, expected 1")
        return self


def default_world(seed: int = 0, user_count: int = 224, **overrides) -> WorldConfig:
    return WorldConfig(seed=seed, user_count=user_count, **overrides)
