"""Deterministic synthetic completion telemetry with known acceptance probabilities."""

from .config import (
    DEFAULT_EFFECTS,
    BehaviorProfile,
    DependenceModel,
    LanguageShare,
    ProfileShare,
    WorldConfig,
    default_world,
)
from .generate import ClosedLoopResult, UserLoopStats, generate, generate_closed_loop
from .world import GENERATOR_VERSION, World

__all__ = [
    "DEFAULT_EFFECTS",
    "GENERATOR_VERSION",
    "BehaviorProfile",
    "ClosedLoopResult",
    "DependenceModel",
    "LanguageShare",
    "ProfileShare",
    "UserLoopStats",
    "World",
    "WorldConfig",
    "default_world",
    "generate",
    "generate_closed_loop",
]
