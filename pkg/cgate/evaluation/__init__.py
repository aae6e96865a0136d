"""Offline replay, trade-off curves, user-level A/B bootstrap and AUC helpers."""

from .auc import bayes_auc, roc_auc
from .bootstrap import (
    DEFAULT_METRICS,
    DEFAULT_RESAMPLES,
    BootstrapResult,
    ab_compare,
    bootstrap_delta,
    save_ab_report,
    user_totals,
)
from .curve import CurvePoint, TradeoffCurve, curve, curve_scored, export_curve, load_curve, plot_curve
from .metrics import MetricsReport, check_provenance, raw_metrics, replay, replay_scored

__all__ = [
    "DEFAULT_METRICS",
    "DEFAULT_RESAMPLES",
    "BootstrapResult",
    "CurvePoint",
    "MetricsReport",
    "TradeoffCurve",
    "ab_compare",
    "bayes_auc",
    "bootstrap_delta",
    "check_provenance",
    "curve",
    "curve_scored",
    "export_curve",
    "load_curve",
    "plot_curve",
    "raw_metrics",
    "replay",
    "replay_scored",
    "roc_auc",
    "save_ab_report",
    "user_totals",
]
