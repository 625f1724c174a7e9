"""Frame traces and closed-loop client population configuration.

A FrameTrace is the sequence of true object counts the simulated clients
replay. Synthetic traces come from a Markov chain over the five groups
(temporal continuity is the property the group estimator exploits), with
group-4 counts drawn from a thin geometric tail.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import EmptyTrace, InvalidConfig, ParseError
from .profiles import NUM_GROUPS

_ROW_SUM_TOL = 1e-9


@dataclass(frozen=True)
class FrameTrace:
    """Ordered sequence of true object counts, immutable and shared read-only."""

    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.counts:
            raise EmptyTrace("trace must contain at least one frame")
        for i, c in enumerate(self.counts):
            if c < 0:
                raise InvalidConfig(f"frame {i}: count must be >= 0, got {c}")

    def __len__(self) -> int:
        return len(self.counts)


def sticky_transition(stationary: Sequence[float], stickiness: float) -> tuple[tuple[float, ...], ...]:
    """Row-stochastic matrix: stay put with prob `stickiness`, else draw iid from `stationary`.

    The chain's stationary distribution is exactly `stationary` for any
    stickiness in [0, 1).
    """
    if len(stationary) != NUM_GROUPS:
        raise InvalidConfig(f"stationary distribution must have {NUM_GROUPS} entries")
    if any(p < 0 for p in stationary) or abs(sum(stationary) - 1.0) > _ROW_SUM_TOL:
        raise InvalidConfig("stationary distribution must be non-negative and sum to 1")
    if not 0.0 <= stickiness <= 1.0:
        raise InvalidConfig(f"stickiness must be in [0, 1], got {stickiness}")
    rest = 1.0 - stickiness
    return tuple(
        tuple((stickiness if i == j else 0.0) + rest * stationary[j] for j in range(NUM_GROUPS))
        for i in range(NUM_GROUPS)
    )


@dataclass(frozen=True)
class TraceGenConfig:
    """Synthetic trace parameters.

    group_transition is a 5x5 row-stochastic matrix over groups. Counts
    within groups 0..3 equal the group index; group 4 yields
    4 + (Geometric(tail_rho) - 1), capped at tail_cap.
    """

    length: int
    group_transition: tuple[tuple[float, ...], ...]
    tail_rho: float = 0.5
    tail_cap: int = 20
    seed: int = 0

    def __post_init__(self) -> None:
        if self.length < 1:
            raise InvalidConfig(f"length must be >= 1, got {self.length}")
        m = self.group_transition
        if len(m) != NUM_GROUPS or any(len(row) != NUM_GROUPS for row in m):
            raise InvalidConfig(f"group_transition must be a {NUM_GROUPS}x{NUM_GROUPS} matrix")
        for i, row in enumerate(m):
            if any(p < 0 for p in row):
                raise InvalidConfig(f"group_transition row {i} has a negative probability")
            if abs(sum(row) - 1.0) > _ROW_SUM_TOL:
                raise InvalidConfig(f"group_transition row {i} sums to {sum(row)!r}, not 1")
        if not 0.0 < self.tail_rho < 1.0:
            raise InvalidConfig(f"tail_rho must be in (0, 1), got {self.tail_rho}")
        if self.tail_cap < NUM_GROUPS - 1:
            raise InvalidConfig(f"tail_cap must be >= {NUM_GROUPS - 1}, got {self.tail_cap}")


def _sample_count(group: int, rng: np.random.Generator, cfg: TraceGenConfig) -> int:
    if group < NUM_GROUPS - 1:
        return group
    # numpy's geometric has support {1, 2, ...}; shift so group 4 can yield exactly 4
    return min(NUM_GROUPS - 2 + int(rng.geometric(cfg.tail_rho)), cfg.tail_cap)


def generate_trace(cfg: TraceGenConfig) -> FrameTrace:
    """Deterministic Markov trace: uniform start group, then chain transitions."""
    rng = np.random.default_rng(cfg.seed)
    rows = [np.asarray(row, dtype=float) for row in cfg.group_transition]
    group = int(rng.integers(NUM_GROUPS))
    counts = []
    for _ in range(cfg.length):
        counts.append(_sample_count(group, rng, cfg))
        group = int(rng.choice(NUM_GROUPS, p=rows[group]))
    return FrameTrace(tuple(counts))


def load_trace(path: str | Path) -> FrameTrace:
    """Load a trace from CSV: one non-negative integer per line, '#' comments allowed."""
    path = Path(path)
    counts = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                value = int(line)
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: not an integer: {line!r}") from exc
            if value < 0:
                raise ParseError(f"{path}:{lineno}: count must be >= 0, got {value}")
            counts.append(value)
    if not counts:
        raise EmptyTrace(f"{path}: trace contains no frames")
    return FrameTrace(tuple(counts))


@dataclass(frozen=True)
class ClientConfig:
    """Closed-loop client population: each user has one request in flight at a time."""

    num_users: int
    think_time_ms: float = 0.0
    requests_per_user: int | None = None
    total_duration_ms: float | None = None

    def __post_init__(self) -> None:
        if self.num_users < 1:
            raise InvalidConfig(f"num_users must be >= 1, got {self.num_users}")
        if self.think_time_ms < 0:
            raise InvalidConfig(f"think_time_ms must be >= 0, got {self.think_time_ms}")
        has_rpu = self.requests_per_user is not None
        has_dur = self.total_duration_ms is not None
        if has_rpu == has_dur:
            raise InvalidConfig("exactly one of requests_per_user / total_duration_ms must be set")
        if has_rpu and self.requests_per_user < 1:
            raise InvalidConfig(f"requests_per_user must be >= 1, got {self.requests_per_user}")
        if has_dur and self.total_duration_ms <= 0:
            raise InvalidConfig(f"total_duration_ms must be > 0, got {self.total_duration_ms}")


def user_offsets(trace_length: int, num_users: int) -> list[int]:
    """Starting frame index per user: evenly spaced offsets into the shared trace."""
    step = trace_length // num_users
    return [(i * step) % trace_length for i in range(num_users)]
