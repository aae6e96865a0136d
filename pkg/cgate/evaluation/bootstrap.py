"""
User-level A/B comparison with bootstrap confidence intervals.

Users are the resampling unit: each arm's users are drawn with replacement and the
relative difference of the arm metrics is recomputed for every resample.
"""

import json
from collections.abc import Sequence
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict

from ..events.dataset import Dataset
from ..events.types import Outcome
from ..exceptions import DatasetIOError
from ..logging import logger

DEFAULT_RESAMPLES = 2000
DEFAULT_METRICS = ("accept_rate", "cancel_rate", "symbols_completed")
RATE_METRICS = frozenset({"accept_rate", "cancel_rate"})
KNOWN_METRICS = ("accept_rate", "cancel_rate", "symbols_completed", "shown", "accepted", "generations")


class BootstrapResult(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="strings")

    metric: str
    point_delta_pct: float
    ci_low_pct: float
    ci_high_pct: float
    significant: bool
    resamples: int
    arm_a_value: float
    arm_b_value: float
    users_a: int
    users_b: int
    pooled: bool = False


def user_totals(dataset: Dataset) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Per-user (numerator, denominator) arrays for every known metric, users in sorted order."""
    users = dataset.users()
    row = {u: i for i, u in enumerate(users)}
    n = len(users)
    shown = np.zeros(n)
    accepted = np.zeros(n)
    cancels = np.zeros(n)
    symbols = np.zeros(n)
    generations = np.zeros(n)
    for event, generation in dataset.pairs():
        i = row[event.user_id]
        generations[i] += 1
        if generation.outcome.shown:
            shown[i] += 1
        if generation.outcome is Outcome.ACCEPTED:
            accepted[i] += 1
            symbols[i] += generation.completion_length
        elif generation.outcome is Outcome.EXPLICIT_CANCEL:
            cancels[i] += 1
    ones = np.ones(n)
    return {
        "accept_rate": (accepted, shown),
        "cancel_rate": (cancels, shown),
        "symbols_completed": (symbols, ones),
        "shown": (shown, ones),
        "accepted": (accepted, ones),
        "generations": (generations, ones),
    }


def _arm_value(num: np.ndarray, den: np.ndarray, pooled: bool, axis=None):
    if pooled:
        with np.errstate(divide="ignore", invalid="ignore"):
            return num.sum(axis=axis) / den.sum(axis=axis)
    return (num / den).mean(axis=axis)


def bootstrap_delta(
    metric: str,
    arm_a: tuple[np.ndarray, np.ndarray],
    arm_b: tuple[np.ndarray, np.ndarray],
    resamples: int = DEFAULT_RESAMPLES,
    rng: np.random.Generator | None = None,
    pooled: bool = False,
    confidence: float = 0.95,
) -> BootstrapResult | None:
    """Relative difference ``100 * (B - A) / A`` with a percentile interval.

    Users with a zero denominator are left out of user-level rates. Returns None when
    the metric is undefined for an arm.
    """
    rng = rng or np.random.default_rng(0)
    num_a, den_a = (np.asarray(v, dtype=np.float64) for v in arm_a)
    num_b, den_b = (np.asarray(v, dtype=np.float64) for v in arm_b)
    if not pooled:
        keep_a, keep_b = den_a > 0, den_b > 0
        num_a, den_a, num_b, den_b = num_a[keep_a], den_a[keep_a], num_b[keep_b], den_b[keep_b]
    if num_a.size == 0 or num_b.size == 0 or den_a.sum() == 0 or den_b.sum() == 0:
        logger.warning(f"Skipping {metric}: undefined in one arm (zero denominator)")
        return None
    a = float(_arm_value(num_a, den_a, pooled))
    b = float(_arm_value(num_b, den_b, pooled))
    if a == 0.0:
        logger.warning(f"Skipping {metric}: arm A value is 0, relative change undefined")
        return None

    idx_a = rng.integers(0, num_a.size, size=(resamples, num_a.size))
    idx_b = rng.integers(0, num_b.size, size=(resamples, num_b.size))
    boot_a = _arm_value(num_a[idx_a], den_a[idx_a], pooled, axis=1)
    boot_b = _arm_value(num_b[idx_b], den_b[idx_b], pooled, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        deltas = 100.0 * (boot_b - boot_a) / boot_a
    deltas = deltas[np.isfinite(deltas)]
    tail = 100.0 * (1.0 - confidence) / 2.0
    low, high = (float(v) for v in np.percentile(deltas, [tail, 100.0 - tail]))
    return BootstrapResult(
        metric=metric,
        point_delta_pct=100.0 * (b - a) / a,
        ci_low_pct=low,
        ci_high_pct=high,
        significant=not (low <= 0.0 <= high),
        resamples=resamples,
        arm_a_value=a,
        arm_b_value=b,
        users_a=int(num_a.size),
        users_b=int(num_b.size),
        pooled=pooled,
    )


def ab_compare(
    arm_a: Dataset,
    arm_b: Dataset,
    metrics: Sequence[str] = DEFAULT_METRICS,
    resamples: int = DEFAULT_RESAMPLES,
    seed: int = 0,
    pooled: bool = False,
) -> list[BootstrapResult]:
    """Compare two arms metric by metric; metrics undefined in an arm are skipped.

    Raises:
        ValueError: if an arm has fewer than two users or a metric is unknown.
    """
    unknown = [m for m in metrics if m not in KNOWN_METRICS]
    if unknown:
        raise ValueError(f"unknown metrics {unknown}; choose from {list(KNOWN_METRICS)}")
    totals_a, totals_b = user_totals(arm_a), user_totals(arm_b)
    for label, dataset in (("A", arm_a), ("B", arm_b)):
        if len(dataset.users()) < 2:
            raise ValueError(f"arm {label} needs at least two users, has {len(dataset.users())}")
    rng = np.random.default_rng(seed)
    results = []
    for metric in metrics:
        result = bootstrap_delta(metric, totals_a[metric], totals_b[metric], resamples, rng, pooled)
        if result is not None:
            results.append(result)
            logger.info(
                f"{metric}: {result.point_delta_pct:+.2f}% "
                f"[{result.ci_low_pct:+.2f}, {result.ci_high_pct:+.2f}] significant={result.significant}"
            )
    return results


def save_ab_report(results: Sequence[BootstrapResult], path: str | Path) -> Path:
    path = Path(path)
    document = {"results": [json.loads(r.model_dump_json()) for r in results]}
    try:
        path.write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")
    except OSError as e:
        raise DatasetIOError(f"cannot write report {path}: {e}") from e
    return path
