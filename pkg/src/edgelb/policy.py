"""Per-request node selection policies.

The two-stage multi-objective policy (MO) first filters device-model pairs
by profiled accuracy for the request's group, then scores every node that
hosts a surviving pair with a weighted sum of min-max normalized expected
latency and energy, and picks the argmin. Six baselines (RR, RND, LC, LE,
LT, HA) share the same inputs.

All functions here are pure: they read an immutable ProfileTable and
NodeRegistry plus a caller-owned queue snapshot, and any mutable state
(round-robin counter, random generator) is passed in explicitly.

Candidate universe: node-selecting policies only consider pairs actually
hosted by at least one registry node, so a selectable node always exists.
When every table pair is hosted (the normal deployment), this coincides
with filtering over the whole table.

Tie-breaks are deterministic. MO resolves equal scores by lower profiled
energy, then lower profiled time, then registry order. LC and LT break
ties by registry order. LE and HA break pair ties by table order and pick
the first registry node among replicas.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import ConfigError, InvalidDelta
from .profiles import NodeRegistry, ProfileTable, validate_group

QueueSnapshot = Mapping[str, int]

POLICY_KINDS = ("MO", "RR", "RND", "LC", "LE", "LT", "HA")
GAMMA_SWEEP = (0.0, 0.25, 0.5, 0.75, 1.0)


@dataclass(frozen=True)
class MoParams:
    """Weighted-sum trade-off weight and accuracy tolerance."""

    gamma: float
    delta_map: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma must be in [0, 1], got {self.gamma}")
        if self.delta_map < 0:
            raise ConfigError(f"delta_map must be >= 0, got {self.delta_map}")


@dataclass(frozen=True)
class CandidateScore:
    """Audit row for one candidate node scored by the MO policy."""

    node_id: str
    l_exp_ms: float
    l_norm: float
    e_norm: float
    score: float


@dataclass(frozen=True)
class Decision:
    """Selected node plus the full audit trail of the scoring pass."""

    node_id: str
    pair_id: str
    feasible_set: tuple[str, ...]
    per_candidate: tuple[CandidateScore, ...]
    tiebreak_applied: bool


def feasible_pairs(
    table: ProfileTable,
    group: int,
    delta: float,
    among: Iterable[str] | None = None,
) -> list[str]:
    """Pairs whose accuracy for the group is within delta of the best.

    The universe defaults to the whole table; pass `among` to restrict it
    (e.g. to registry-hosted pairs). The returned list keeps the universe
    order and always contains every argmax-accuracy pair.
    """
    validate_group(group)
    if delta < 0:
        raise InvalidDelta(f"delta must be >= 0, got {delta}")
    pool = tuple(among) if among is not None else table.pair_ids
    threshold = max(table.map(p, group) for p in pool) - delta
    return [p for p in pool if table.map(p, group) >= threshold]


def expected_latency(t_ms: float, q: int) -> float:
    """Queue-aware delay estimate: profiled time scaled by (1 + queue length)."""
    return t_ms * (1 + q)


def min_max_normalize(values: Sequence[float]) -> list[float]:
    """Map values to [0, 1] via (v - min) / (max - min); a zero range maps all to 0."""
    if not values:
        raise ValueError("cannot normalize an empty sequence")
    lo = min(values)
    hi = max(values)
    if hi == lo:
        return [0.0] * len(values)
    span = hi - lo
    return [(v - lo) / span for v in values]


def score(l_norm: float, e_norm: float, gamma: float) -> float:
    """Convex combination of the normalized objectives: gamma weights latency."""
    return gamma * l_norm + (1.0 - gamma) * e_norm


def _hosted_pairs(table: ProfileTable, registry: NodeRegistry) -> list[str]:
    """Table pairs hosted by at least one node, in stable table order."""
    return [p for p in table.pair_ids if p in registry.pair_id_set]


def _first_node_hosting(registry: NodeRegistry, pair_id: str) -> str:
    for n in registry.nodes:
        if n.pair_id == pair_id:
            return n.node_id
    raise KeyError(pair_id)


def select_mo(
    table: ProfileTable,
    registry: NodeRegistry,
    snapshot: QueueSnapshot,
    group: int,
    params: MoParams,
) -> Decision:
    """Two-stage selection: accuracy filter, then weighted-sum argmin over nodes.

    Candidate nodes are all nodes hosting a feasible pair; replicas appear
    as separate candidates with their own queue lengths and their pair's
    energy. Normalization spans the candidate nodes.
    """
    feasible = feasible_pairs(table, group, params.delta_map, among=_hosted_pairs(table, registry))
    feasible_set = set(feasible)
    candidates = [
        (i, n) for i, n in enumerate(registry.nodes) if n.pair_id in feasible_set
    ]

    l_exp = [
        expected_latency(table.time_ms(n.pair_id, group), snapshot[n.node_id])
        for _, n in candidates
    ]
    e_raw = [table.energy_mwh(n.pair_id, group) for _, n in candidates]
    l_norm = min_max_normalize(l_exp)
    e_norm = min_max_normalize(e_raw)
    scores = [score(l, e, params.gamma) for l, e in zip(l_norm, e_norm)]

    best = None
    best_key = None
    for idx, (reg_idx, n) in enumerate(candidates):
        key = (scores[idx], e_raw[idx], table.time_ms(n.pair_id, group), reg_idx)
        if best_key is None or key < best_key:
            best_key = key
            best = idx

    j_min = scores[best]
    selected = candidates[best][1]
    return Decision(
        node_id=selected.node_id,
        pair_id=selected.pair_id,
        feasible_set=tuple(feasible),
        per_candidate=tuple(
            CandidateScore(
                node_id=n.node_id,
                l_exp_ms=l_exp[idx],
                l_norm=l_norm[idx],
                e_norm=e_norm[idx],
                score=scores[idx],
            )
            for idx, (_, n) in enumerate(candidates)
        ),
        tiebreak_applied=sum(1 for s in scores if s == j_min) > 1,
    )


def select_rr(registry: NodeRegistry, rr_state: int) -> tuple[str, int]:
    """Cyclic dispatch: node at (counter mod n) in registry order, counter incremented."""
    node = registry.nodes[rr_state % len(registry.nodes)]
    return node.node_id, rr_state + 1


def select_rnd(registry: NodeRegistry, rng) -> str:
    """Uniform choice over nodes from the policy's own seeded generator."""
    return registry.nodes[int(rng.integers(len(registry.nodes)))].node_id


def select_lc(registry: NodeRegistry, snapshot: QueueSnapshot) -> str:
    """Node with the fewest queued requests; ties go to registry order."""
    return min(registry.nodes, key=lambda n: snapshot[n.node_id]).node_id


def select_le(table: ProfileTable, registry: NodeRegistry, group: int) -> str:
    """Node hosting the lowest-energy pair for the group (a fixed configuration)."""
    validate_group(group)
    hosted = _hosted_pairs(table, registry)
    best_pair = min(hosted, key=lambda p: table.energy_mwh(p, group))
    return _first_node_hosting(registry, best_pair)


def select_lt(
    table: ProfileTable,
    registry: NodeRegistry,
    snapshot: QueueSnapshot,
    group: int,
) -> str:
    """Node minimizing profiled time times (1 + queue length); ties by registry order."""
    validate_group(group)
    return min(
        registry.nodes,
        key=lambda n: expected_latency(table.time_ms(n.pair_id, group), snapshot[n.node_id]),
    ).node_id


def select_ha(table: ProfileTable, registry: NodeRegistry, group: int) -> str:
    """Node hosting the highest-accuracy pair for the group (a fixed configuration)."""
    validate_group(group)
    hosted = _hosted_pairs(table, registry)
    best_pair = max(hosted, key=lambda p: table.map(p, group))
    return _first_node_hosting(registry, best_pair)


def _gamma_suffix(gamma: float) -> str:
    if gamma == 0.0:
        return "0"
    if gamma == 1.0:
        return "1"
    return str(int(round(gamma * 100)))


@dataclass(frozen=True)
class PolicySpec:
    """Configured policy: kind plus MO parameters or the RND seed where relevant."""

    kind: str
    gamma: float | None = None
    delta_map: float | None = None
    seed: int | None = None
    label_override: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in POLICY_KINDS:
            raise ConfigError(f"unknown policy kind {self.kind!r} (expected one of {POLICY_KINDS})")
        if self.kind == "MO":
            if self.gamma is None or self.delta_map is None:
                raise ConfigError("MO policy requires gamma and delta_map")
            MoParams(self.gamma, self.delta_map)  # range validation
        elif self.gamma is not None or self.delta_map is not None:
            raise ConfigError(f"policy {self.kind} does not take gamma/delta_map")
        if self.seed is not None and self.kind != "RND":
            raise ConfigError(f"policy {self.kind} does not take a seed")

    @property
    def label(self) -> str:
        if self.label_override:
            return self.label_override
        if self.kind == "MO":
            return f"MO_gamma_{_gamma_suffix(self.gamma)}"
        return self.kind

    @property
    def mo_params(self) -> MoParams:
        if self.kind != "MO":
            raise ConfigError(f"policy {self.kind} has no MO parameters")
        return MoParams(self.gamma, self.delta_map)

    @classmethod
    def from_dict(cls, data: Mapping) -> "PolicySpec":
        if "kind" not in data:
            raise ConfigError("policy entry requires a 'kind' field")
        known = {"kind", "gamma", "delta_map", "seed", "label"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown policy fields: {sorted(unknown)}")
        return cls(
            kind=str(data["kind"]),
            gamma=data.get("gamma"),
            delta_map=data.get("delta_map"),
            seed=data.get("seed"),
            label_override=data.get("label"),
        )
