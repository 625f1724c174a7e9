"""Deterministic discrete-event simulation of the gateway and edge cluster.

Closed-loop clients replay a shared frame trace from per-user offsets.
Each request is group-estimated from the stream's previous detection,
routed by the configured policy using a queue snapshot, and served by a
single-server FIFO node. Service time is the profiled time for the frame's
true group (optionally jittered, mean-preserving) plus a fixed gateway
overhead; energy and accuracy are charged by the true group.

The event loop is single-threaded: a heap ordered by (time, sequence
number) with sequence numbers assigned monotonically at push, so identical
configurations replay identically, event for event.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_right
from collections import deque
from dataclasses import dataclass
from heapq import heappop, heappush
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ConfigError
from .estimator import StreamState, count_to_group, estimate_group, update_after_response
from .policy import (
    Decision,
    PolicySpec,
    select_ha,
    select_lc,
    select_le,
    select_lt,
    select_mo,
    select_rnd,
    select_rr,
)
from .profiles import NodeRegistry, ProfileTable, load_nodes, load_profiles
from .workload import ClientConfig, FrameTrace, TraceGenConfig, generate_trace, load_trace, user_offsets

SCHEMA_VERSION = 1

_ISSUE = 0
_COMPLETE = 1


@dataclass(frozen=True)
class SimConfig:
    """One simulation run: cluster, workload, policy, knobs, and seed.

    profiles/nodes accept either loaded objects or file paths; trace accepts
    a FrameTrace, a TraceGenConfig, or a CSV path.
    """

    policy: PolicySpec
    profiles: ProfileTable | str | Path
    nodes: NodeRegistry | str | Path
    trace: FrameTrace | TraceGenConfig | str | Path
    clients: ClientConfig
    gateway_overhead_ms: float = 0.0
    service_jitter_sigma: float = 0.0
    miscount_prob: float = 0.0
    seed: int = 0
    snapshot_staleness_ms: float = 0.0
    first_frame_count: int | None = None

    def __post_init__(self) -> None:
        if self.gateway_overhead_ms < 0:
            raise ConfigError(f"gateway_overhead_ms must be >= 0, got {self.gateway_overhead_ms}")
        if self.service_jitter_sigma < 0:
            raise ConfigError(f"service_jitter_sigma must be >= 0, got {self.service_jitter_sigma}")
        if not 0.0 <= self.miscount_prob <= 1.0:
            raise ConfigError(f"miscount_prob must be in [0, 1], got {self.miscount_prob}")
        if self.snapshot_staleness_ms < 0:
            raise ConfigError(f"snapshot_staleness_ms must be >= 0, got {self.snapshot_staleness_ms}")
        if self.first_frame_count is not None and self.first_frame_count < 0:
            raise ConfigError(f"first_frame_count must be >= 0, got {self.first_frame_count}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")


@dataclass(frozen=True)
class RequestRecord:
    """One completed request, as dispatched and served."""

    request_id: int
    client_id: int
    dispatch_time_ms: float
    completion_time_ms: float
    true_group: int
    estimated_group: int
    node_id: str
    pair_id: str
    queue_len_at_decision: int
    latency_ms: float
    energy_mwh_charged: float
    map_credited: float


@dataclass(frozen=True)
class NodeState:
    """End-of-run accounting for one node."""

    node_id: str
    pair_id: str
    completed_count: int
    cumulative_busy_ms: float
    cumulative_energy_mwh: float


@dataclass(frozen=True)
class SimResult:
    records: tuple[RequestRecord, ...]
    node_states: tuple[NodeState, ...]
    duration_ms: float
    mo_audits: tuple[Decision | None, ...]


class NodeRuntime:
    """Live single-server FIFO node state, with a queue-length history for stale snapshots."""

    __slots__ = (
        "node_id",
        "pair_id",
        "qlen",
        "waiting",
        "current",
        "hist_t",
        "hist_q",
        "cumulative_busy_ms",
        "cumulative_energy_mwh",
        "completed_count",
    )

    def __init__(self, node_id: str, pair_id: str):
        self.node_id = node_id
        self.pair_id = pair_id
        self.qlen = 0  # in service + waiting
        self.waiting = deque()
        self.current = None
        self.hist_t: list[float] = []
        self.hist_q: list[int] = []
        self.cumulative_busy_ms = 0.0
        self.cumulative_energy_mwh = 0.0
        self.completed_count = 0

    def mark(self, t: float) -> None:
        self.hist_t.append(t)
        self.hist_q.append(self.qlen)


def snapshot_queues(nodes: Iterable[NodeRuntime], now: float, staleness_ms: float = 0.0) -> dict[str, int]:
    """Queue lengths the gateway sees: exact, or as of (now - staleness_ms).

    A lookback before the start of the simulation reports empty queues.
    """
    if staleness_ms < 0:
        raise ConfigError(f"staleness_ms must be >= 0, got {staleness_ms}")
    if staleness_ms == 0:
        return {n.node_id: n.qlen for n in nodes}
    cutoff = now - staleness_ms
    if cutoff < 0:
        return {n.node_id: 0 for n in nodes}
    snap = {}
    for n in nodes:
        i = bisect_right(n.hist_t, cutoff) - 1
        snap[n.node_id] = n.hist_q[i] if i >= 0 else 0
    return snap


def sample_service_time(t_ms: float, sigma: float, rng) -> float:
    """Profiled time with multiplicative lognormal noise whose mean stays t_ms.

    sigma = 0 returns t_ms exactly; otherwise t_ms * exp(sigma*Z - sigma^2/2)
    with Z standard normal from the supplied generator.
    """
    if not t_ms > 0:
        raise ConfigError(f"t_ms must be > 0, got {t_ms}")
    if sigma < 0:
        raise ConfigError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return t_ms
    z = float(rng.standard_normal())
    return t_ms * math.exp(sigma * z - 0.5 * sigma * sigma)


class _Pending:
    __slots__ = (
        "request_id",
        "client_id",
        "dispatch_ms",
        "true_count",
        "true_group",
        "estimated_group",
        "node_idx",
        "queue_len_at_decision",
        "service_ms",
    )

    def __init__(self, request_id, client_id, dispatch_ms, true_count, true_group, estimated_group, node_idx, qlen):
        self.request_id = request_id
        self.client_id = client_id
        self.dispatch_ms = dispatch_ms
        self.true_count = true_count
        self.true_group = true_group
        self.estimated_group = estimated_group
        self.node_idx = node_idx
        self.queue_len_at_decision = qlen
        self.service_ms = 0.0


def _resolve_inputs(cfg: SimConfig) -> tuple[ProfileTable, NodeRegistry, FrameTrace]:
    table = cfg.profiles if isinstance(cfg.profiles, ProfileTable) else load_profiles(cfg.profiles)
    registry = cfg.nodes if isinstance(cfg.nodes, NodeRegistry) else load_nodes(cfg.nodes, table)
    if isinstance(cfg.trace, FrameTrace):
        trace = cfg.trace
    elif isinstance(cfg.trace, TraceGenConfig):
        trace = generate_trace(cfg.trace)
    else:
        trace = load_trace(cfg.trace)
    return table, registry, trace


def run_sim(cfg: SimConfig) -> SimResult:
    """Run one closed-loop simulation to completion (all in-flight work drains)."""
    table, registry, trace = _resolve_inputs(cfg)
    clients = cfg.clients
    num_users = clients.num_users
    think_ms = clients.think_time_ms
    rpu = clients.requests_per_user
    duration_limit = clients.total_duration_ms
    staleness = cfg.snapshot_staleness_ms
    sigma = cfg.service_jitter_sigma
    overhead = cfg.gateway_overhead_ms
    miscount = cfg.miscount_prob
    policy = cfg.policy
    kind = policy.kind
    mo_params = policy.mo_params if kind == "MO" else None

    svc_seq, mis_seq, pol_seq = np.random.SeedSequence(cfg.seed).spawn(3)
    svc_rng = np.random.default_rng(svc_seq)
    mis_rng = np.random.default_rng(mis_seq)
    pol_rng = np.random.default_rng(policy.seed if policy.seed is not None else pol_seq)

    nodes = [NodeRuntime(n.node_id, n.pair_id) for n in registry.nodes]
    node_index = {n.node_id: i for i, n in enumerate(nodes)}
    trace_counts = trace.counts
    trace_len = len(trace_counts)
    offsets = user_offsets(trace_len, num_users)
    streams = [StreamState(stream_id=i) for i in range(num_users)]
    issued = [0] * num_users
    rr_state = 0

    records: list[RequestRecord | None] = []
    audits: list[Decision | None] = []
    heap: list[tuple[float, int, int, int]] = []
    seq = 0
    last_completion = 0.0

    def push(t: float, kind_code: int, idx: int) -> None:
        nonlocal seq
        heappush(heap, (t, seq, kind_code, idx))
        seq += 1

    def start_service(node: NodeRuntime, pend: _Pending, t: float) -> None:
        base = table.time_ms(node.pair_id, pend.true_group)
        pend.service_ms = sample_service_time(base, sigma, svc_rng) + overhead
        node.current = pend
        push(t + pend.service_ms, _COMPLETE, pend.node_idx)

    def handle_issue(ci: int, t: float) -> None:
        nonlocal rr_state
        if rpu is not None and issued[ci] >= rpu:
            return
        if duration_limit is not None and t >= duration_limit:
            return
        true_count = trace_counts[(offsets[ci] + issued[ci]) % trace_len]
        true_group = count_to_group(true_count)
        default_count = cfg.first_frame_count if cfg.first_frame_count is not None else true_count
        est_group = estimate_group(streams[ci], default_count)
        snap = snapshot_queues(nodes, t, staleness)

        audit = None
        if kind == "MO":
            audit = select_mo(table, registry, snap, est_group, mo_params)
            node_id = audit.node_id
        elif kind == "RR":
            node_id, rr_state = select_rr(registry, rr_state)
        elif kind == "RND":
            node_id = select_rnd(registry, pol_rng)
        elif kind == "LC":
            node_id = select_lc(registry, snap)
        elif kind == "LE":
            node_id = select_le(table, registry, est_group)
        elif kind == "LT":
            node_id = select_lt(table, registry, snap, est_group)
        else:  # HA
            node_id = select_ha(table, registry, est_group)

        ni = node_index[node_id]
        node = nodes[ni]
        pend = _Pending(len(records), ci, t, true_count, true_group, est_group, ni, node.qlen)
        records.append(None)
        audits.append(audit)
        issued[ci] += 1
        node.qlen += 1
        node.mark(t)
        if node.current is None:
            start_service(node, pend, t)
        else:
            node.waiting.append(pend)

    def handle_complete(ni: int, t: float) -> None:
        nonlocal last_completion
        node = nodes[ni]
        pend = node.current
        node.current = None
        node.cumulative_busy_ms += pend.service_ms
        energy = table.energy_mwh(node.pair_id, pend.true_group)
        credited = table.map(node.pair_id, pend.true_group)
        node.cumulative_energy_mwh += energy
        node.completed_count += 1
        node.qlen -= 1
        node.mark(t)
        last_completion = t

        records[pend.request_id] = RequestRecord(
            request_id=pend.request_id,
            client_id=pend.client_id,
            dispatch_time_ms=pend.dispatch_ms,
            completion_time_ms=t,
            true_group=pend.true_group,
            estimated_group=pend.estimated_group,
            node_id=node.node_id,
            pair_id=node.pair_id,
            queue_len_at_decision=pend.queue_len_at_decision,
            latency_ms=t - pend.dispatch_ms,
            energy_mwh_charged=energy,
            map_credited=credited,
        )

        ci = pend.client_id
        streams[ci] = update_after_response(streams[ci], pend.true_count, miscount, mis_rng)
        push(t + think_ms, _ISSUE, ci)
        if node.waiting:
            start_service(node, node.waiting.popleft(), t)

    for ci in range(num_users):
        push(0.0, _ISSUE, ci)
    while heap:
        t, _, kind_code, idx = heappop(heap)
        if kind_code == _ISSUE:
            handle_issue(idx, t)
        else:
            handle_complete(idx, t)

    node_states = tuple(
        NodeState(
            node_id=n.node_id,
            pair_id=n.pair_id,
            completed_count=n.completed_count,
            cumulative_busy_ms=n.cumulative_busy_ms,
            cumulative_energy_mwh=n.cumulative_energy_mwh,
        )
        for n in nodes
    )
    return SimResult(
        records=tuple(records),
        node_states=node_states,
        duration_ms=last_completion,
        mo_audits=tuple(audits),
    )


def _record_dict(r: RequestRecord) -> dict:
    return {
        "request_id": r.request_id,
        "client_id": r.client_id,
        "dispatch_time_ms": r.dispatch_time_ms,
        "completion_time_ms": r.completion_time_ms,
        "true_group": r.true_group,
        "estimated_group": r.estimated_group,
        "node_id": r.node_id,
        "pair_id": r.pair_id,
        "queue_len_at_decision": r.queue_len_at_decision,
        "latency_ms": r.latency_ms,
        "energy_mwh_charged": r.energy_mwh_charged,
        "map_credited": r.map_credited,
    }


def result_to_dict(result: SimResult) -> dict:
    """JSON-ready view of a SimResult (records plus node summaries)."""
    return {
        "schema_version": SCHEMA_VERSION,
        "duration_ms": result.duration_ms,
        "records": [_record_dict(r) for r in result.records],
        "nodes": [
            {
                "node_id": s.node_id,
                "pair_id": s.pair_id,
                "completed_count": s.completed_count,
                "cumulative_busy_ms": s.cumulative_busy_ms,
                "cumulative_energy_mwh": s.cumulative_energy_mwh,
            }
            for s in result.node_states
        ],
    }


def result_to_json(result: SimResult) -> str:
    return json.dumps(result_to_dict(result), separators=(",", ":"))


def write_decision_log(path: str | Path, result: SimResult) -> None:
    """JSON-lines decision log: one request per line, with the MO audit when present."""
    with open(path, "w", encoding="utf-8") as fh:
        for r, audit in zip(result.records, result.mo_audits):
            line = _record_dict(r)
            if audit is not None:
                line["audit"] = {
                    "feasible_set": list(audit.feasible_set),
                    "per_candidate": [
                        {
                            "node_id": c.node_id,
                            "l_exp_ms": c.l_exp_ms,
                            "l_norm": c.l_norm,
                            "e_norm": c.e_norm,
                            "score": c.score,
                        }
                        for c in audit.per_candidate
                    ],
                    "tiebreak_applied": audit.tiebreak_applied,
                }
            fh.write(json.dumps(line, separators=(",", ":")) + "\n")
