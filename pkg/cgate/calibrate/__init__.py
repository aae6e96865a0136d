"""Threshold policies and their calibration at target false-negative rates."""

from .policy import NON_COMPILABLE, HardRules, PolicyProvenance, ThresholdPolicy, load_policy, save_policy
from .sweep import (
    DEFAULT_GRID,
    DEFAULT_TARGETS,
    SweepFile,
    SweepPoint,
    calibrate_policy,
    load_sweep,
    save_sweep,
    sweep_joint,
)
from .thresholds import (
    FnrBudget,
    combined_fnr,
    percentile_threshold,
    rule_blocked,
    threshold_at_fnr,
    threshold_for_count,
)

__all__ = [
    "DEFAULT_GRID",
    "DEFAULT_TARGETS",
    "NON_COMPILABLE",
    "FnrBudget",
    "HardRules",
    "PolicyProvenance",
    "SweepFile",
    "SweepPoint",
    "ThresholdPolicy",
    "calibrate_policy",
    "combined_fnr",
    "load_policy",
    "load_sweep",
    "percentile_threshold",
    "rule_blocked",
    "save_policy",
    "save_sweep",
    "sweep_joint",
    "threshold_at_fnr",
    "threshold_for_count",
]
