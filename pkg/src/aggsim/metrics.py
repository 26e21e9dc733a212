"""Performance indexes computed from run results.

Throughput is the sum of successfully delivered bits divided by the sum of
the delivered packets' latencies, i.e. the average bitrate experienced per
transmission (it can exceed the generation rate). Outage is the fraction
of generated packets never delivered within the horizon. Latency covers
delivered packets only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .engine import RunResult


def throughput(result: RunResult) -> float:
    """Bits per second over delivered packets; 0.0 when nothing arrived."""
    bits = 0
    latency_s = 0.0
    for p in result.packets:
        if p.delivery_time_ms is not None:
            bits += 8 * p.size_bytes
            latency_s += (p.delivery_time_ms - p.arrival_time_ms) / 1000.0
    if bits == 0:
        return 0.0
    return bits / latency_s


def outage(result: RunResult) -> float:
    if result.generated == 0:
        raise ValueError("outage undefined without generated packets")
    return (result.generated - result.delivered) / result.generated


def latency_stats(result: RunResult) -> dict:
    lat = [p.delivery_time_ms - p.arrival_time_ms
           for p in result.packets if p.delivery_time_ms is not None]
    if not lat:
        raise ValueError("no delivered packets")
    arr = np.asarray(lat)
    return {
        "mean_ms": float(arr.mean()),
        "median_ms": float(np.median(arr)),
        "p95_ms": float(np.percentile(arr, 95)),
    }


@dataclass(frozen=True)
class MetricSummary:
    throughput_bps: float
    mean_latency_ms: float
    median_latency_ms: float
    p95_latency_ms: float
    outage_fraction: float
    tx_error: int
    pdcch_starvation: int
    pusch_starvation: int
    pdsch_starvation: int
    preamble_collisions: int
    per_aggregator_throughput_bps: float
    generated: int
    delivered: int
    dropped_ra: int
    dropped_harq: int
    undelivered_at_end: int


def per_aggregator_throughput(result: RunResult) -> float:
    """Mean over UEs that delivered anything of their own bits/latency rate."""
    rates = [bits / (lat_ms / 1000.0)
             for (_, _, pkts, bits, lat_ms) in result.ue_stats
             if pkts > 0 and lat_ms > 0]
    return float(np.mean(rates)) if rates else 0.0


def summarize(result: RunResult) -> MetricSummary:
    delivered = result.delivered > 0
    lat = latency_stats(result) if delivered else {"mean_ms": math.nan,
                                                   "median_ms": math.nan,
                                                   "p95_ms": math.nan}
    out = outage(result) if result.generated > 0 else math.nan
    inc = result.incidents
    return MetricSummary(
        throughput_bps=throughput(result),
        mean_latency_ms=lat["mean_ms"],
        median_latency_ms=lat["median_ms"],
        p95_latency_ms=lat["p95_ms"],
        outage_fraction=out,
        tx_error=inc["tx_error"],
        pdcch_starvation=inc["pdcch_starvation"],
        pusch_starvation=inc["pusch_starvation"],
        pdsch_starvation=inc["pdsch_starvation"],
        preamble_collisions=inc["preamble_collisions"],
        per_aggregator_throughput_bps=per_aggregator_throughput(result),
        generated=result.generated,
        delivered=result.delivered,
        dropped_ra=result.dropped_ra,
        dropped_harq=result.dropped_harq,
        undelivered_at_end=result.undelivered_at_end,
    )


def mean_ci(values, confidence: float = 0.95) -> tuple[float, float]:
    """Sample mean and Student-t confidence half-width (0 for one sample)."""
    arr = np.asarray(list(values), dtype=float)
    n = len(arr)
    if n == 0:
        return math.nan, math.nan
    mean = float(arr.mean())
    if n == 1:
        return mean, 0.0
    half = float(stats.t.ppf(0.5 + confidence / 2.0, n - 1)
                 * arr.std(ddof=1) / math.sqrt(n))
    return mean, half


def find_optimal_n(summaries: dict) -> tuple[int, float]:
    """Argmax of throughput over the swept aggregator counts; ties break to
    the smallest count. Values may be MetricSummary or plain numbers."""
    if not summaries:
        raise ValueError("no entries to search")
    best_n = None
    best_tp = -math.inf
    for n in sorted(summaries):
        value = summaries[n]
        tp = value.throughput_bps if isinstance(value, MetricSummary) else float(value)
        if tp > best_tp:
            best_n, best_tp = n, tp
    return best_n, best_tp
