"""Experiment runner CLI.

Commands:
    run          execute the configured policy x users x repeats grid
    gamma-sweep  expand the config's MO policy over gamma in {0, .25, .5, .75, 1}
    validate     load and cross-check a profiles file and a nodes file

Exit codes: 0 success, 1 config/validation/IO error, 2 unexpected runtime failure.

Every grid cell gets its own seed, derived as the first 8 bytes of
blake2b("<base_seed>|<policy_label>|<users>|<repeat>"), so any single cell
can be re-run in isolation with an identical result.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterator

from .errors import ConfigError, EdgeLbError
from .metrics import (
    MetricsSummary,
    summarize,
    write_aggregate_csv,
    write_cdf_csv,
    write_summary_csv,
)
from .policy import GAMMA_SWEEP, PolicySpec
from .profiles import GROUPS, load_nodes, load_profiles
from .simulator import SimConfig, SimResult, run_sim, write_decision_log
from .workload import ClientConfig, TraceGenConfig, sticky_transition

CONFIG_SCHEMA_VERSION = 1
DEFAULT_USERS = (1, 3, 5, 7, 9, 11, 13, 15)


def derive_cell_seed(base_seed: int, policy_label: str, users: int, repeat: int) -> int:
    """Stable 64-bit per-cell seed from the experiment seed and grid coordinates."""
    key = f"{base_seed}|{policy_label}|{users}|{repeat}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "big")


@dataclass(frozen=True)
class ExperimentConfig:
    profiles_path: Path
    nodes_path: Path
    trace: TraceGenConfig | Path
    think_time_ms: float
    requests_per_user: int | None
    total_duration_ms: float | None
    gateway_overhead_ms: float
    service_jitter_sigma: float
    miscount_prob: float
    snapshot_staleness_ms: float
    first_frame_count: int | None
    seed: int
    users: tuple[int, ...]
    repeats: int
    policies: tuple[PolicySpec, ...]

    def __post_init__(self) -> None:
        if not self.users or any(u < 1 for u in self.users):
            raise ConfigError("users must be a non-empty list of integers >= 1")
        if self.repeats < 1:
            raise ConfigError(f"repeats must be >= 1, got {self.repeats}")
        if not self.policies:
            raise ConfigError("at least one policy is required")
        labels = [p.label for p in self.policies]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"policy labels must be unique, got {labels}")

    def sim_config(self, policy: PolicySpec, users: int, seed: int) -> SimConfig:
        return SimConfig(
            policy=policy,
            profiles=self.profiles_path,
            nodes=self.nodes_path,
            trace=self.trace,
            clients=ClientConfig(
                num_users=users,
                think_time_ms=self.think_time_ms,
                requests_per_user=self.requests_per_user,
                total_duration_ms=self.total_duration_ms,
            ),
            gateway_overhead_ms=self.gateway_overhead_ms,
            service_jitter_sigma=self.service_jitter_sigma,
            miscount_prob=self.miscount_prob,
            seed=seed,
            snapshot_staleness_ms=self.snapshot_staleness_ms,
            first_frame_count=self.first_frame_count,
        )

    def echo_dict(self) -> dict:
        trace: dict
        if isinstance(self.trace, TraceGenConfig):
            trace = {
                "length": self.trace.length,
                "transition": [list(row) for row in self.trace.group_transition],
                "tail_rho": self.trace.tail_rho,
                "tail_cap": self.trace.tail_cap,
                "seed": self.trace.seed,
            }
        else:
            trace = {"file": str(self.trace)}
        return {
            "schema_version": CONFIG_SCHEMA_VERSION,
            "profiles": str(self.profiles_path),
            "nodes": str(self.nodes_path),
            "trace": trace,
            "clients": {
                "think_time_ms": self.think_time_ms,
                "requests_per_user": self.requests_per_user,
                "total_duration_ms": self.total_duration_ms,
            },
            "gateway_overhead_ms": self.gateway_overhead_ms,
            "service_jitter_sigma": self.service_jitter_sigma,
            "miscount_prob": self.miscount_prob,
            "snapshot_staleness_ms": self.snapshot_staleness_ms,
            "first_frame_count": self.first_frame_count,
            "seed": self.seed,
            "users": list(self.users),
            "repeats": self.repeats,
            "policies": [
                {
                    "kind": p.kind,
                    "gamma": p.gamma,
                    "delta_map": p.delta_map,
                    "seed": p.seed,
                    "label": p.label,
                }
                for p in self.policies
            ],
        }


def _resolve(base_dir: Path, value: str) -> Path:
    p = Path(value)
    return p if p.is_absolute() else base_dir / p


def _parse_trace(data: dict, base_dir: Path, base_seed: int) -> TraceGenConfig | Path:
    if not isinstance(data, dict):
        raise ConfigError("'trace' must be an object")
    if "file" in data:
        return _resolve(base_dir, str(data["file"]))
    if "transition" in data:
        transition = tuple(tuple(float(x) for x in row) for row in data["transition"])
    elif "stationary" in data:
        transition = sticky_transition(
            [float(x) for x in data["stationary"]], float(data.get("stickiness", 0.8))
        )
    else:
        raise ConfigError("'trace' needs 'file', 'transition', or 'stationary'")
    if "length" not in data:
        raise ConfigError("'trace' needs a 'length' field")
    seed = data.get("seed")
    if seed is None:
        seed = derive_cell_seed(base_seed, "trace", 0, 0)
    return TraceGenConfig(
        length=int(data["length"]),
        group_transition=transition,
        tail_rho=float(data.get("tail_rho", 0.5)),
        tail_cap=int(data.get("tail_cap", 20)),
        seed=int(seed),
    )


def load_experiment_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    if doc.get("schema_version") != CONFIG_SCHEMA_VERSION:
        raise ConfigError(
            f"{path}: unsupported schema_version {doc.get('schema_version')!r} "
            f"(expected {CONFIG_SCHEMA_VERSION})"
        )
    for key in ("profiles", "nodes", "trace", "policies"):
        if key not in doc:
            raise ConfigError(f"{path}: missing required field {key!r}")
    base_dir = path.parent
    seed = int(doc.get("seed", 0))
    clients = doc.get("clients", {})
    if not isinstance(clients, dict):
        raise ConfigError(f"{path}: 'clients' must be an object")
    rpu = clients.get("requests_per_user")
    dur = clients.get("total_duration_ms")
    policies = tuple(PolicySpec.from_dict(p) for p in doc["policies"])
    ffc = doc.get("first_frame_count")
    return ExperimentConfig(
        profiles_path=_resolve(base_dir, str(doc["profiles"])),
        nodes_path=_resolve(base_dir, str(doc["nodes"])),
        trace=_parse_trace(doc["trace"], base_dir, seed),
        think_time_ms=float(clients.get("think_time_ms", 0.0)),
        requests_per_user=None if rpu is None else int(rpu),
        total_duration_ms=None if dur is None else float(dur),
        gateway_overhead_ms=float(doc.get("gateway_overhead_ms", 0.0)),
        service_jitter_sigma=float(doc.get("service_jitter_sigma", 0.0)),
        miscount_prob=float(doc.get("miscount_prob", 0.0)),
        snapshot_staleness_ms=float(doc.get("snapshot_staleness_ms", 0.0)),
        first_frame_count=None if ffc is None else int(ffc),
        seed=seed,
        users=tuple(int(u) for u in doc.get("users", DEFAULT_USERS)),
        repeats=int(doc.get("repeats", 3)),
        policies=policies,
    )


@dataclass(frozen=True)
class GridCell:
    label: str
    users: int
    repeat: int
    seed: int
    summary: MetricsSummary
    result: SimResult


def iter_grid_cells(cfg: ExperimentConfig) -> Iterator[GridCell]:
    """Run the grid cell by cell in fixed grid order (policies, then users, then repeats)."""
    for policy in cfg.policies:
        label = policy.label
        for users in cfg.users:
            for repeat in range(cfg.repeats):
                seed = derive_cell_seed(cfg.seed, label, users, repeat)
                result = run_sim(cfg.sim_config(policy, users, seed))
                yield GridCell(label, users, repeat, seed, summarize(result, label, users), result)


def run_grid(cfg: ExperimentConfig) -> list[GridCell]:
    return list(iter_grid_cells(cfg))


def _apply_overrides(cfg: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    if args.seed is not None:
        # the derived trace seed (if any) intentionally stays as loaded
        cfg = replace(cfg, seed=args.seed)
    if args.users is not None:
        try:
            users = tuple(int(u) for u in args.users.split(",") if u.strip())
        except ValueError as exc:
            raise ConfigError(f"--users must be a comma-separated integer list, got {args.users!r}") from exc
        cfg = replace(cfg, users=users)
    if args.repeats is not None:
        cfg = replace(cfg, repeats=args.repeats)
    if getattr(args, "policy", None) is not None:
        kind = args.policy
        if kind == "MO":
            spec = PolicySpec(kind="MO", gamma=0.5, delta_map=0.1)
        else:
            spec = PolicySpec(kind=kind)
        cfg = replace(cfg, policies=(spec,))
    return cfg


class _OutputTracker:
    """Records files written by one invocation so they can be removed on failure."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.written: list[Path] = []

    def path(self, *parts: str) -> Path:
        p = self.out_dir.joinpath(*parts)
        p.parent.mkdir(parents=True, exist_ok=True)
        self.written.append(p)
        return p

    def cleanup(self) -> None:
        for p in self.written:
            try:
                p.unlink()
            except OSError:
                pass


def _print_table(cells: list[GridCell]) -> None:
    header = f"{'policy':<14} {'users':>5} {'seed':>20} {'done':>6} {'avg_ms':>10} {'p90_ms':>10} {'rps':>8} {'mwh/req':>9} {'mAP':>6}"
    print(header)
    for c in cells:
        s = c.summary
        print(
            f"{c.label:<14} {c.users:>5} {c.seed:>20} {s.completed:>6} "
            f"{s.avg_latency_ms:>10.1f} {s.p90_latency_ms:>10.1f} {s.throughput_rps:>8.2f} "
            f"{s.energy_per_request_mwh:>9.4f} {s.mean_map:>6.3f}"
        )


def _execute_grid(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    out = _OutputTracker(Path(args.out))
    out.out_dir.mkdir(parents=True, exist_ok=True)
    try:
        echo = out.path("config-echo.json")
        echo.write_text(json.dumps(cfg.echo_dict(), indent=2) + "\n", encoding="utf-8")

        cells: list[GridCell] = []
        pooled: dict[tuple[str, int], list[float]] = {}
        pool_order: list[tuple[str, int]] = []
        for cell in iter_grid_cells(cfg):
            if args.decision_log:
                log = out.path("decisions", f"{cell.label}_u{cell.users}_r{cell.repeat}.jsonl")
                write_decision_log(log, cell.result)
            key = (cell.label, cell.users)
            if key not in pooled:
                pooled[key] = []
                pool_order.append(key)
            pooled[key].extend(r.latency_ms for r in cell.result.records)
            cells.append(GridCell(cell.label, cell.users, cell.repeat, cell.seed, cell.summary, None))

        rows = [(c.label, c.users, c.seed, c.summary) for c in cells]
        write_summary_csv(out.path("summary.csv"), rows)
        write_cdf_csv(
            out.path("cdf.csv"),
            [(label, users, pooled[(label, users)]) for label, users in pool_order],
        )
        if args.aggregate:
            write_aggregate_csv(out.path("aggregate.csv"), rows)
    except BaseException:
        out.cleanup()
        raise
    _print_table(cells)
    print(f"wrote {out.out_dir / 'summary.csv'} ({len(cells)} rows)")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _apply_overrides(load_experiment_config(args.config), args)
    return _execute_grid(cfg, args)


def cmd_gamma_sweep(args: argparse.Namespace) -> int:
    cfg = _apply_overrides(load_experiment_config(args.config), args)
    base = cfg.policies[0]
    if base.kind != "MO":
        raise ConfigError("gamma-sweep requires the config's first policy to be MO")
    sweep = tuple(
        PolicySpec(kind="MO", gamma=g, delta_map=base.delta_map) for g in GAMMA_SWEEP
    )
    return _execute_grid(replace(cfg, policies=sweep), args)


def cmd_validate(args: argparse.Namespace) -> int:
    table = load_profiles(args.profiles)
    registry = load_nodes(args.nodes, table)
    print(f"profiles: {len(table.pairs)} pairs x {len(GROUPS)} groups; nodes: {len(registry)}")
    for g in GROUPS:
        best_t = min(table.pair_ids, key=lambda p: table.time_ms(p, g))
        best_e = min(table.pair_ids, key=lambda p: table.energy_mwh(p, g))
        best_m = max(table.pair_ids, key=lambda p: table.map(p, g))
        print(
            f"group {g}: fastest={best_t} ({table.time_ms(best_t, g):g} ms)  "
            f"lowest-energy={best_e} ({table.energy_mwh(best_e, g):g} mWh)  "
            f"best-map={best_m} ({table.map(best_m, g):g})"
        )
    hosted = sorted(registry.pair_id_set)
    unhosted = [p for p in table.pair_ids if p not in registry.pair_id_set]
    print(f"hosted pairs: {', '.join(hosted)}")
    if unhosted:
        print(f"warning: pairs with no node: {', '.join(unhosted)}")
    print("OK")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="edgelb", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_grid_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--out", default="edgelb-out", help="output directory (default: edgelb-out)")
        p.add_argument("--seed", type=int, default=None, help="override the base seed")
        p.add_argument("--users", default=None, help="override the users sweep, e.g. 1,3,15")
        p.add_argument("--repeats", type=int, default=None, help="override the repeat count")
        p.add_argument("--decision-log", action="store_true", help="write per-request JSONL decision logs")
        p.add_argument("--aggregate", action="store_true",
                       help="also write aggregate.csv (mean/std/range across repeats)")

    run_p = sub.add_parser("run", help="run the configured policy grid")
    add_grid_flags(run_p)
    run_p.add_argument("--policy", default=None, choices=["MO", "RR", "RND", "LC", "LE", "LT", "HA"],
                       help="run a single policy instead of the configured list")
    run_p.set_defaults(func=cmd_run)

    sweep_p = sub.add_parser("gamma-sweep", help="sweep gamma over {0, 0.25, 0.5, 0.75, 1}")
    add_grid_flags(sweep_p)
    sweep_p.set_defaults(func=cmd_gamma_sweep)

    val_p = sub.add_parser("validate", help="validate a profiles file and a nodes file")
    val_p.add_argument("--profiles", required=True, help="profiles JSON file")
    val_p.add_argument("--nodes", required=True, help="nodes JSON file")
    val_p.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (EdgeLbError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 -- runtime failures map to exit code 2
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
