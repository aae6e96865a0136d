"""
Joint trigger/filter calibration.

For each grid point the trigger takes the block rate named by the point and whatever
false negatives that costs; the filter gets the rest of the budget.
"""

from collections.abc import Sequence
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError

from ..events.types import JsonFloat
from ..exceptions import ArtifactError, CalibrationError, DatasetIOError
from ..logging import logger
from ..scoring import ScoredDataset
from .policy import HardRules, PolicyProvenance, ThresholdPolicy
from .thresholds import FnrBudget, combined_fnr, percentile_threshold, rule_blocked, threshold_for_count

DEFAULT_GRID: tuple[float, ...] = tuple(float(g) for g in range(0, 65, 5))
DEFAULT_TARGETS: tuple[float, ...] = (0.01, 0.05, 0.10, 0.20)


class SweepPoint(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="strings")

    grid_pct: float
    target_fnr: float
    feasible: bool
    policy: ThresholdPolicy | None = None
    realized_fnr: JsonFloat | None = None
    trigger_blocked: int
    trigger_fn: int
    surviving_positives: int


def sweep_joint(
    scored: ScoredDataset,
    target_fnr: float,
    grid: Sequence[float] = DEFAULT_GRID,
    hard_rules: HardRules | None = None,
    provenance: PolicyProvenance | None = None,
) -> list[SweepPoint]:
    """Calibrate one policy per grid point, or mark the point infeasible.

    The trigger threshold is the ``g``-th percentile of trigger scores over all
    generations. Trigger false negatives and hard-rule blocks are charged against
    ``floor(target_fnr * P)``; the filter threshold blocks at most the remainder of the
    positives that got past both. Realized FNR never exceeds the target on ``scored``.

    Raises:
        CalibrationError: on an empty grid or a dataset without positives.
    """
    if not grid:
        raise CalibrationError("sweep grid is empty")
    hard_rules = hard_rules or HardRules()
    budget = FnrBudget(target_fnr=target_fnr, total_positives=scored.total_positives)
    if budget.total_positives == 0:
        raise CalibrationError("cannot calibrate on a dataset without positives")
    rules_only = ThresholdPolicy(hard_rules=hard_rules)
    ruled = rule_blocked(rules_only, scored)

    points = []
    for g in sorted(grid):
        trigger_threshold = percentile_threshold(scored.trigger_scores, g)
        passed = scored.trigger_scores >= trigger_threshold
        trigger_fn = int(np.sum(scored.positive & ~passed))
        surviving = scored.positive & passed
        remaining = budget.allowed_fn - trigger_fn - int(np.sum(surviving & ruled))
        common = {
            "grid_pct": g,
            "target_fnr": target_fnr,
            "trigger_blocked": int(np.sum(~passed)),
            "trigger_fn": trigger_fn,
            "surviving_positives": int(surviving.sum()),
        }
        if remaining < 0:
            points.append(SweepPoint(feasible=False, **common))
            continue
        filter_threshold = threshold_for_count(scored.filter_scores[surviving & ~ruled], remaining)
        details = (provenance or PolicyProvenance()).model_copy(update={"target_fnr": target_fnr, "grid_pct": g})
        policy = ThresholdPolicy(
            trigger_threshold=trigger_threshold,
            filter_threshold=filter_threshold,
            hard_rules=hard_rules,
            provenance=details,
        )
        realized = combined_fnr(policy, scored)
        policy = policy.model_copy(update={"provenance": details.model_copy(update={"realized_fnr": realized})})
        points.append(SweepPoint(feasible=True, policy=policy, realized_fnr=realized, **common))

    feasible = sum(p.feasible for p in points)
    logger.info(f"Sweep at FNR {target_fnr}: {feasible} of {len(points)} grid points feasible")
    return points


def calibrate_policy(
    scored: ScoredDataset,
    target_fnr: float,
    grid_pct: float = 0.0,
    hard_rules: HardRules | None = None,
    provenance: PolicyProvenance | None = None,
) -> ThresholdPolicy:
    """The sweep's policy at a single grid point.

    Raises:
        CalibrationError: if the point is infeasible.
    """
    (point,) = sweep_joint(scored, target_fnr, [grid_pct], hard_rules, provenance)
    if not point.feasible:
        raise CalibrationError(
            f"grid point {grid_pct}% is infeasible at FNR {target_fnr}: "
            f"the trigger alone blocks {point.trigger_fn} positives"
        )
    return point.policy


class SweepFile(BaseModel):
    """On-disk form of one or more sweeps."""

    model_config = ConfigDict(ser_json_inf_nan="strings")

    points: list[SweepPoint] = []


def save_sweep(points: Sequence[SweepPoint], path: str | Path) -> Path:
    path = Path(path)
    try:
        path.write_text(SweepFile(points=list(points)).model_dump_json(indent=2) + "\n", encoding="utf-8")
    except OSError as e:
        raise DatasetIOError(f"cannot write sweep {path}: {e}") from e
    return path


def load_sweep(path: str | Path) -> dict[float, list[SweepPoint]]:
    """Sweep points grouped by target FNR, each group sorted by grid percentage."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise DatasetIOError(f"cannot read sweep {path}: {e}") from e
    try:
        points = SweepFile.model_validate_json(text).points
    except ValidationError as e:
        raise ArtifactError(f"{path} is not a valid sweep: {e}") from e
    groups: dict[float, list[SweepPoint]] = {}
    for p in points:
        groups.setdefault(p.target_fnr, []).append(p)
    return {fnr: sorted(group, key=lambda p: p.grid_pct) for fnr, group in sorted(groups.items())}
