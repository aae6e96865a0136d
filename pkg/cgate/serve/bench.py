"""
Load generator for the gate service.

The request corpus is drawn from a synthetic world, so the same seed always yields
the same requests; only the measured latencies vary between runs.
"""

import asyncio
import math
import time
from collections.abc import Sequence

import numpy as np
from pydantic import BaseModel

from ..events.dataset import Dataset
from ..events.types import merged_features
from ..logging import logger
from ..synthgen import default_world, generate
from .protocol import GateRequest

OPPORTUNITIES_PER_USER = 120
PERCENTILES = (50, 90, 99)


class BenchReport(BaseModel):
    requests: int
    concurrency: int
    errors: int = 0
    elapsed_s: float = 0.0
    throughput_rps: float = 0.0
    p50_us: float | None = None
    p90_us: float | None = None
    p99_us: float | None = None


def corpus_from_dataset(dataset: Dataset, n: int) -> list[GateRequest]:
    """``n`` requests cycling through the dataset; even ids are trigger requests, odd ones filter."""
    pairs = list(dataset.pairs())
    if n and not pairs:
        raise ValueError("dataset has no generations to draw requests from")
    requests = []
    for i in range(n):
        event, generation = pairs[(i // 2) % len(pairs)]
        if i % 2 == 0:
            requests.append(
                GateRequest(id=f"r{i}", kind="trigger", features=event.trigger_features, context=event.context)
            )
        else:
            requests.append(
                GateRequest(
                    id=f"r{i}",
                    kind="filter",
                    features=merged_features(event, generation),
                    context=event.context,
                    compilable=generation.compilable,
                )
            )
    return requests


def build_corpus(n: int, seed: int = 0) -> list[GateRequest]:
    if n == 0:
        return []
    users = max(1, math.ceil(n / 2 / OPPORTUNITIES_PER_USER))
    return corpus_from_dataset(generate(default_world(seed=seed, user_count=users)), n)


async def _worker(host: str, port: int, requests: Sequence[GateRequest], latencies: list[float]) -> int:
    from ..client import GateClient

    errors = 0
    async with GateClient(host, port) as client:
        for request in requests:
            started = time.perf_counter_ns()
            response = await client.request(request)
            latencies.append((time.perf_counter_ns() - started) / 1000)
            if getattr(response, "error", None):
                errors += 1
    return errors


async def bench(
    host: str,
    port: int,
    requests: int,
    concurrency: int = 8,
    seed: int = 0,
    corpus: Sequence[GateRequest] | None = None,
) -> BenchReport:
    """Round-trip latency percentiles over ``concurrency`` connections.

    Raises:
        ConnectionError: if the service cannot be reached.
    """
    if concurrency < 1:
        raise ValueError("concurrency must be at least 1")
    corpus = list(corpus) if corpus is not None else build_corpus(requests, seed)
    if not corpus:
        return BenchReport(requests=0, concurrency=concurrency)
    shards = [corpus[i::concurrency] for i in range(concurrency)]
    latencies: list[list[float]] = [[] for _ in shards]
    started = time.perf_counter()
    errors = await asyncio.gather(
        *(_worker(host, port, shard, lat) for shard, lat in zip(shards, latencies, strict=True) if shard)
    )
    elapsed = time.perf_counter() - started
    values = np.concatenate([np.asarray(lat) for lat in latencies if lat])
    p50, p90, p99 = (float(v) for v in np.percentile(values, PERCENTILES))
    report = BenchReport(
        requests=len(corpus),
        concurrency=concurrency,
        errors=sum(errors),
        elapsed_s=elapsed,
        throughput_rps=len(corpus) / elapsed if elapsed > 0 else 0.0,
        p50_us=p50,
        p90_us=p90,
        p99_us=p99,
    )
    logger.info(f"bench: {report.requests} requests, p50 {p50:.0f}us p90 {p90:.0f}us p99 {p99:.0f}us")
    return report
