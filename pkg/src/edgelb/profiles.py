"""Offline profiling data model.

A ProfileTable holds, for every (device-model pair, object-count group),
the profiled per-request inference time, energy, and detection accuracy.
A NodeRegistry maps physical edge nodes to the pair each one hosts; the
same pair may be hosted by several nodes (replicas with separate queues).

Both structures are immutable after construction and safe to share across
threads or concurrent simulations.

File formats (see also the README):

profiles file (JSON)::

    {
      "schema_version": 1,
      "pairs":   [{"pair_id": "...", "device": "...", "model": "...", "runtime": "..."}, ...],
      "entries": [{"pair_id": "...", "group": 0, "inference_time_ms": 8.3,
                   "energy_mwh": 0.06, "map": 1.0}, ...]
    }

nodes file (JSON)::

    {"schema_version": 1, "nodes": [{"node_id": "...", "pair_id": "..."}, ...]}

Coverage must be dense: every (pair, group) combination has exactly one
entry. Groups are the five object-count buckets 0, 1, 2, 3, and 4 (four
or more objects).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .errors import InvalidDelta, ParseError, ValidationError

NUM_GROUPS = 5
GROUPS: tuple[int, ...] = tuple(range(NUM_GROUPS))
SCHEMA_VERSION = 1


def validate_group(group: int) -> int:
    if not isinstance(group, int) or isinstance(group, bool) or not 0 <= group < NUM_GROUPS:
        raise ValidationError(f"group must be an integer in [0, {NUM_GROUPS - 1}], got {group!r}")
    return group


@dataclass(frozen=True)
class DeviceModelPair:
    """One profiled device-model combination (the unit of offline profiling)."""

    pair_id: str
    device: str
    model: str
    runtime: str = ""


@dataclass(frozen=True)
class ProfileEntry:
    """Profiled cost/quality of one pair on one object-count group."""

    pair_id: str
    group: int
    inference_time_ms: float
    energy_mwh: float
    map: float

    def __post_init__(self) -> None:
        validate_group(self.group)
        if not self.inference_time_ms > 0:
            raise ValidationError(
                f"pair {self.pair_id!r} group {self.group}: inference_time_ms must be > 0, "
                f"got {self.inference_time_ms}"
            )
        if self.energy_mwh < 0:
            raise ValidationError(
                f"pair {self.pair_id!r} group {self.group}: energy_mwh must be >= 0, got {self.energy_mwh}"
            )
        if not 0.0 <= self.map <= 1.0:
            raise ValidationError(
                f"pair {self.pair_id!r} group {self.group}: map must be in [0, 1], got {self.map}"
            )


class ProfileTable:
    """Dense (pair x group) profiling table with stable pair order.

    The pair order of the source file is preserved; it is the stable order
    used by policy tie-breaks.
    """

    def __init__(self, pairs: Iterable[DeviceModelPair], entries: Iterable[ProfileEntry]):
        self.pairs: tuple[DeviceModelPair, ...] = tuple(pairs)
        if not self.pairs:
            raise ValidationError("profile table must contain at least one pair")

        seen_ids: set[str] = set()
        seen_combos: set[tuple[str, str, str]] = set()
        for p in self.pairs:
            if p.pair_id in seen_ids:
                raise ValidationError(f"duplicate pair_id {p.pair_id!r}")
            seen_ids.add(p.pair_id)
            combo = (p.device, p.model, p.runtime)
            if combo in seen_combos:
                raise ValidationError(f"duplicate (device, model, runtime) combination {combo!r}")
            seen_combos.add(combo)

        self._entries: dict[tuple[str, int], ProfileEntry] = {}
        for e in entries:
            if e.pair_id not in seen_ids:
                raise ValidationError(f"entry references unknown pair_id {e.pair_id!r}")
            key = (e.pair_id, e.group)
            if key in self._entries:
                raise ValidationError(f"duplicate entry for pair {e.pair_id!r} group {e.group}")
            self._entries[key] = e
        for p in self.pairs:
            for g in GROUPS:
                if (p.pair_id, g) not in self._entries:
                    raise ValidationError(f"missing entry for pair {p.pair_id!r} group {g}")

    @property
    def pair_ids(self) -> tuple[str, ...]:
        return tuple(p.pair_id for p in self.pairs)

    def pair(self, pair_id: str) -> DeviceModelPair:
        for p in self.pairs:
            if p.pair_id == pair_id:
                return p
        raise KeyError(pair_id)

    def entry(self, pair_id: str, group: int) -> ProfileEntry:
        return self._entries[(pair_id, group)]

    def time_ms(self, pair_id: str, group: int) -> float:
        return self._entries[(pair_id, group)].inference_time_ms

    def energy_mwh(self, pair_id: str, group: int) -> float:
        return self._entries[(pair_id, group)].energy_mwh

    def map(self, pair_id: str, group: int) -> float:
        return self._entries[(pair_id, group)].map

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ProfileTable):
            return NotImplemented
        return self.pairs == other.pairs and self._entries == other._entries

    def __repr__(self) -> str:
        return f"ProfileTable({len(self.pairs)} pairs, {len(self._entries)} entries)"

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "pairs": [
                {"pair_id": p.pair_id, "device": p.device, "model": p.model, "runtime": p.runtime}
                for p in self.pairs
            ],
            "entries": [
                {
                    "pair_id": p.pair_id,
                    "group": g,
                    "inference_time_ms": self._entries[(p.pair_id, g)].inference_time_ms,
                    "energy_mwh": self._entries[(p.pair_id, g)].energy_mwh,
                    "map": self._entries[(p.pair_id, g)].map,
                }
                for p in self.pairs
                for g in GROUPS
            ],
        }


@dataclass(frozen=True)
class NodeAssignment:
    """One physical edge node and the device-model pair it hosts."""

    node_id: str
    pair_id: str


class NodeRegistry:
    """Ordered list of edge nodes; the order is the stable node tie-break order."""

    def __init__(self, nodes: Iterable[NodeAssignment], table: ProfileTable):
        self.nodes: tuple[NodeAssignment, ...] = tuple(nodes)
        if not self.nodes:
            raise ValidationError("node registry must contain at least one node")
        known = set(table.pair_ids)
        seen: set[str] = set()
        for n in self.nodes:
            if n.node_id in seen:
                raise ValidationError(f"duplicate node_id {n.node_id!r}")
            seen.add(n.node_id)
            if n.pair_id not in known:
                raise ValidationError(f"node {n.node_id!r} references unknown pair_id {n.pair_id!r}")
        self._pair_by_node = {n.node_id: n.pair_id for n in self.nodes}
        self.pair_id_set: frozenset[str] = frozenset(self._pair_by_node.values())

    @property
    def node_ids(self) -> tuple[str, ...]:
        return tuple(n.node_id for n in self.nodes)

    def pair_of(self, node_id: str) -> str:
        return self._pair_by_node[node_id]

    def __len__(self) -> int:
        return len(self.nodes)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NodeRegistry):
            return NotImplemented
        return self.nodes == other.nodes

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "nodes": [{"node_id": n.node_id, "pair_id": n.pair_id} for n in self.nodes],
        }


def _check_schema_version(doc: Mapping, path: Path) -> None:
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValidationError(f"{path}: unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")


def _load_json_object(path: Path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: expected a top-level JSON object")
    return doc


def _field(record: Mapping, name: str, where: str):
    if name not in record:
        raise ParseError(f"{where}: missing field {name!r}")
    return record[name]


def _num(record: Mapping, name: str, where: str) -> float:
    value = _field(record, name, where)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{where}: field {name!r} must be a number, got {value!r}")
    return float(value)


def load_profiles(path: str | Path) -> ProfileTable:
    """Load and validate a profiles file.

    Raises ParseError for malformed files and ValidationError (with the
    offending pair/group named) for semantic violations.
    """
    path = Path(path)
    doc = _load_json_object(path)
    _check_schema_version(doc, path)

    raw_pairs = doc.get("pairs")
    raw_entries = doc.get("entries")
    if not isinstance(raw_pairs, list) or not isinstance(raw_entries, list):
        raise ParseError(f"{path}: 'pairs' and 'entries' must be JSON arrays")

    pairs = []
    for i, rec in enumerate(raw_pairs):
        where = f"{path}: pairs[{i}]"
        if not isinstance(rec, dict):
            raise ParseError(f"{where}: expected an object")
        pairs.append(
            DeviceModelPair(
                pair_id=str(_field(rec, "pair_id", where)),
                device=str(_field(rec, "device", where)),
                model=str(_field(rec, "model", where)),
                runtime=str(rec.get("runtime", "")),
            )
        )

    entries = []
    for i, rec in enumerate(raw_entries):
        where = f"{path}: entries[{i}]"
        if not isinstance(rec, dict):
            raise ParseError(f"{where}: expected an object")
        group = _field(rec, "group", where)
        if isinstance(group, bool) or not isinstance(group, int):
            raise ParseError(f"{where}: field 'group' must be an integer, got {group!r}")
        entries.append(
            ProfileEntry(
                pair_id=str(_field(rec, "pair_id", where)),
                group=group,
                inference_time_ms=_num(rec, "inference_time_ms", where),
                energy_mwh=_num(rec, "energy_mwh", where),
                map=_num(rec, "map", where),
            )
        )

    return ProfileTable(pairs, entries)


def save_profiles(table: ProfileTable, path: str | Path) -> None:
    Path(path).write_text(json.dumps(table.to_dict(), indent=2) + "\n", encoding="utf-8")


def load_nodes(path: str | Path, table: ProfileTable) -> NodeRegistry:
    """Load a nodes file and validate it against the profile table."""
    path = Path(path)
    doc = _load_json_object(path)
    _check_schema_version(doc, path)
    raw_nodes = doc.get("nodes")
    if not isinstance(raw_nodes, list):
        raise ParseError(f"{path}: 'nodes' must be a JSON array")
    nodes = []
    for i, rec in enumerate(raw_nodes):
        where = f"{path}: nodes[{i}]"
        if not isinstance(rec, dict):
            raise ParseError(f"{where}: expected an object")
        nodes.append(
            NodeAssignment(
                node_id=str(_field(rec, "node_id", where)),
                pair_id=str(_field(rec, "pair_id", where)),
            )
        )
    return NodeRegistry(nodes, table)


def save_nodes(registry: NodeRegistry, path: str | Path) -> None:
    Path(path).write_text(json.dumps(registry.to_dict(), indent=2) + "\n", encoding="utf-8")


def best_map(table: ProfileTable, group: int) -> float:
    """Best profiled accuracy over all pairs for the given group."""
    validate_group(group)
    return max(table.map(p, group) for p in table.pair_ids)


def accuracy_threshold(table: ProfileTable, group: int, delta: float) -> float:
    """Minimum acceptable accuracy for a group given tolerance delta.

    Defined as best_map(group) - delta. May be negative for large delta,
    in which case every pair is admitted downstream (callers compare with >=).
    """
    if delta < 0:
        raise InvalidDelta(f"delta must be >= 0, got {delta}")
    return best_map(table, group) - delta
