"""Aggregation of simulation records into the experiment metric suite.

avg/p90 response time, throughput over the first-dispatch-to-last-completion
window, energy per request (idle power excluded upstream), mean credited
accuracy, and an empirical latency CDF. The p90 uses the nearest-rank
method so values are always members of the sample set.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import EmptyResult, EmptySamples
from .simulator import SimResult


@dataclass(frozen=True)
class MetricsSummary:
    policy: str
    num_users: int
    completed: int
    avg_latency_ms: float
    p90_latency_ms: float
    throughput_rps: float
    energy_per_request_mwh: float
    mean_map: float
    node_utilization: dict[str, float]


def percentile_nearest_rank(samples: Sequence[float], p: float) -> float:
    """Nearest-rank percentile: element at rank ceil(p/100 * n), 1-indexed, over sorted samples."""
    if not samples:
        raise EmptySamples("cannot take a percentile of an empty sample set")
    if not 0.0 < p <= 100.0:
        raise ValueError(f"p must be in (0, 100], got {p}")
    rank = math.ceil(p / 100.0 * len(samples))
    return sorted(samples)[rank - 1]


def export_cdf(samples: Sequence[float]) -> list[tuple[float, float]]:
    """Empirical CDF over unique sample values; the last cumulative fraction is exactly 1."""
    if not samples:
        raise EmptySamples("cannot build a CDF from an empty sample set")
    ordered = sorted(samples)
    n = len(ordered)
    out: list[tuple[float, float]] = []
    for i, v in enumerate(ordered):
        if i + 1 < n and ordered[i + 1] == v:
            continue
        out.append((v, (i + 1) / n))
    return out


def summarize(result: SimResult, policy_label: str, num_users: int) -> MetricsSummary:
    """Aggregate one run's records into a MetricsSummary."""
    if not result.records:
        raise EmptyResult("simulation produced no records")
    latencies = [r.latency_ms for r in result.records]
    completed = len(latencies)
    first_dispatch = min(r.dispatch_time_ms for r in result.records)
    last_completion = max(r.completion_time_ms for r in result.records)
    window_ms = last_completion - first_dispatch
    utilization = {
        s.node_id: (s.cumulative_busy_ms / result.duration_ms if result.duration_ms > 0 else 0.0)
        for s in result.node_states
    }
    return MetricsSummary(
        policy=policy_label,
        num_users=num_users,
        completed=completed,
        avg_latency_ms=sum(latencies) / completed,
        p90_latency_ms=percentile_nearest_rank(latencies, 90.0),
        throughput_rps=completed * 1000.0 / window_ms,
        energy_per_request_mwh=sum(r.energy_mwh_charged for r in result.records) / completed,
        mean_map=sum(r.map_credited for r in result.records) / completed,
        node_utilization=utilization,
    )


def fmt_sig(value: float) -> str:
    """Fixed CSV float format: 6 significant digits."""
    return f"{value:.6g}"


SUMMARY_COLUMNS = (
    "policy",
    "users",
    "seed",
    "completed",
    "avg_ms",
    "p90_ms",
    "throughput_rps",
    "mwh_per_req",
    "mean_map",
)

CDF_COLUMNS = ("policy", "users", "latency_ms", "cum_frac")

_AGG_METRICS = ("avg_ms", "p90_ms", "throughput_rps", "mwh_per_req", "mean_map")


def summary_row(policy: str, users: int, seed: int, s: MetricsSummary) -> list[str]:
    return [
        policy,
        str(users),
        str(seed),
        str(s.completed),
        fmt_sig(s.avg_latency_ms),
        fmt_sig(s.p90_latency_ms),
        fmt_sig(s.throughput_rps),
        fmt_sig(s.energy_per_request_mwh),
        fmt_sig(s.mean_map),
    ]


def write_summary_csv(path: str | Path, rows: Iterable[tuple[str, int, int, MetricsSummary]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for policy, users, seed, s in rows:
            writer.writerow(summary_row(policy, users, seed, s))


def write_cdf_csv(path: str | Path, blocks: Iterable[tuple[str, int, Sequence[float]]]) -> None:
    """One ECDF block per (policy, users), latencies pooled across repeats."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CDF_COLUMNS)
        for policy, users, latencies in blocks:
            for latency, frac in export_cdf(latencies):
                writer.writerow([policy, str(users), fmt_sig(latency), fmt_sig(frac)])


def _mean(xs: Sequence[float]) -> float:
    return sum(xs) / len(xs)


def _stdev(xs: Sequence[float]) -> float:
    if len(xs) < 2:
        return 0.0
    m = _mean(xs)
    return math.sqrt(sum((x - m) ** 2 for x in xs) / (len(xs) - 1))


def aggregate_rows(rows: Sequence[tuple[str, int, int, MetricsSummary]]) -> list[dict]:
    """Per (policy, users) mean / sample stddev / range across repeats, in first-seen order."""
    groups: dict[tuple[str, int], list[MetricsSummary]] = {}
    order: list[tuple[str, int]] = []
    for policy, users, _seed, s in rows:
        key = (policy, users)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(s)
    out = []
    for policy, users in order:
        summaries = groups[(policy, users)]
        values = {
            "avg_ms": [s.avg_latency_ms for s in summaries],
            "p90_ms": [s.p90_latency_ms for s in summaries],
            "throughput_rps": [s.throughput_rps for s in summaries],
            "mwh_per_req": [s.energy_per_request_mwh for s in summaries],
            "mean_map": [s.mean_map for s in summaries],
        }
        agg = {"policy": policy, "users": users, "repeats": len(summaries)}
        for metric in _AGG_METRICS:
            xs = values[metric]
            agg[f"{metric}_mean"] = _mean(xs)
            agg[f"{metric}_std"] = _stdev(xs)
            agg[f"{metric}_range"] = max(xs) - min(xs)
        out.append(agg)
    return out


def write_aggregate_csv(path: str | Path, rows: Sequence[tuple[str, int, int, MetricsSummary]]) -> None:
    header = ["policy", "users", "repeats"]
    for metric in _AGG_METRICS:
        header += [f"{metric}_mean", f"{metric}_std", f"{metric}_range"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for agg in aggregate_rows(rows):
            row = [agg["policy"], str(agg["users"]), str(agg["repeats"])]
            for metric in _AGG_METRICS:
                row += [
                    fmt_sig(agg[f"{metric}_mean"]),
                    fmt_sig(agg[f"{metric}_std"]),
                    fmt_sig(agg[f"{metric}_range"]),
                ]
            writer.writerow(row)
