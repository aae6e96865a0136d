"""
Metrics middleware for gate requests.

Counts per kind, decision outcomes, errors, unknown feature names and latency
percentiles. Requests on the event loop never interleave inside a hook body between
awaits, so the counters need no lock.
"""

import time
from collections import Counter, defaultdict
from typing import Any

from ..logging import logger
from .middleware import Middleware, MiddlewareContext, NextFunctionT

UNKNOWN_FEATURES_KEY = "unknown_features"


def calculate_percentiles(values: list[float]) -> dict[str, float]:
    if not values:
        return {"p50": 0, "p90": 0, "p95": 0, "p99": 0}
    sorted_values = sorted(values)
    n = len(sorted_values)
    return {
        "p50": sorted_values[int(n * 0.5)],
        "p90": sorted_values[int(n * 0.9)],
        "p95": sorted_values[int(n * 0.95)],
        "p99": sorted_values[int(n * 0.99)],
    }


class MetricsMiddleware(Middleware):
    """Collects request counts, pass counts, durations, errors and unknown features."""

    def __init__(self, max_samples: int = 100_000):
        self.max_samples = max_samples
        self.metrics = {
            "total_requests": 0,
            "total_errors": 0,
            "kind_counts": Counter(),
            "kind_passed": Counter(),
            "unknown_features": Counter(),
            "start_time": time.time(),
        }
        self.durations_us: dict[str, list[float]] = defaultdict(list)

    async def on_request(self, context: MiddlewareContext[Any], call_next: NextFunctionT) -> Any:
        self.metrics["total_requests"] += 1
        self.metrics["kind_counts"][context.method] += 1
        for name in context.metadata.get(UNKNOWN_FEATURES_KEY, ()):
            if self.metrics["unknown_features"][name] == 0:
                logger.warning(f"Ignoring unknown feature {name!r} in {context.method} requests")
            self.metrics["unknown_features"][name] += 1
        start = time.perf_counter()
        try:
            result = await call_next(context)
        except Exception:
            self.metrics["total_errors"] += 1
            raise
        finally:
            samples = self.durations_us[context.method]
            if len(samples) < self.max_samples:
                samples.append((time.perf_counter() - start) * 1e6)
        if getattr(result, "passed", False):
            self.metrics["kind_passed"][context.method] += 1
        return result

    def get_metrics(self) -> dict[str, Any]:
        """Current metrics snapshot."""
        uptime = time.time() - self.metrics["start_time"]
        total = self.metrics["total_requests"]
        return {
            "total_requests": total,
            "total_errors": self.metrics["total_errors"],
            "kind_counts": dict(self.metrics["kind_counts"]),
            "kind_passed": dict(self.metrics["kind_passed"]),
            "unknown_features": dict(self.metrics["unknown_features"]),
            "uptime_seconds": uptime,
            "requests_per_second": total / uptime if uptime > 0 else 0,
            "error_rate": self.metrics["total_errors"] / total if total > 0 else 0,
            "latency_us": {kind: calculate_percentiles(values) for kind, values in self.durations_us.items()},
        }
