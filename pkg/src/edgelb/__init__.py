"""Accuracy-aware multi-objective load balancing for heterogeneous edge clusters.

Offline device-model profiles feed a two-stage per-request policy (accuracy
filter, then weighted-sum scoring over expected latency and energy) plus six
baseline policies, all evaluated by a deterministic closed-loop simulator.
"""

from .errors import (
    ConfigError,
    EdgeLbError,
    EmptyResult,
    EmptySamples,
    EmptyTrace,
    InvalidConfig,
    InvalidDelta,
    ParseError,
    ValidationError,
)
from .estimator import StreamState, count_to_group, estimate_group, update_after_response
from .metrics import (
    MetricsSummary,
    export_cdf,
    percentile_nearest_rank,
    summarize,
)
from .policy import (
    Decision,
    MoParams,
    PolicySpec,
    expected_latency,
    feasible_pairs,
    min_max_normalize,
    score,
    select_ha,
    select_lc,
    select_le,
    select_lt,
    select_mo,
    select_rnd,
    select_rr,
)
from .profiles import (
    GROUPS,
    DeviceModelPair,
    NodeAssignment,
    NodeRegistry,
    ProfileEntry,
    ProfileTable,
    accuracy_threshold,
    best_map,
    load_nodes,
    load_profiles,
    save_nodes,
    save_profiles,
)
from .simulator import (
    NodeState,
    RequestRecord,
    SimConfig,
    SimResult,
    result_to_dict,
    result_to_json,
    run_sim,
    sample_service_time,
    snapshot_queues,
    write_decision_log,
)
from .workload import (
    ClientConfig,
    FrameTrace,
    TraceGenConfig,
    generate_trace,
    load_trace,
    sticky_transition,
)

__version__ = "0.1.0"

__all__ = [
    "ClientConfig",
    "ConfigError",
    "Decision",
    "DeviceModelPair",
    "EdgeLbError",
    "EmptyResult",
    "EmptySamples",
    "EmptyTrace",
    "FrameTrace",
    "GROUPS",
    "InvalidConfig",
    "InvalidDelta",
    "MetricsSummary",
    "MoParams",
    "NodeAssignment",
    "NodeRegistry",
    "NodeState",
    "ParseError",
    "PolicySpec",
    "ProfileEntry",
    "ProfileTable",
    "RequestRecord",
    "SimConfig",
    "SimResult",
    "StreamState",
    "TraceGenConfig",
    "ValidationError",
    "accuracy_threshold",
    "best_map",
    "count_to_group",
    "estimate_group",
    "expected_latency",
    "export_cdf",
    "feasible_pairs",
    "generate_trace",
    "load_nodes",
    "load_profiles",
    "load_trace",
    "min_max_normalize",
    "percentile_nearest_rank",
    "result_to_dict",
    "result_to_json",
    "run_sim",
    "sample_service_time",
    "save_nodes",
    "save_profiles",
    "score",
    "select_ha",
    "select_lc",
    "select_le",
    "select_lt",
    "select_mo",
    "select_rnd",
    "select_rr",
    "snapshot_queues",
    "sticky_transition",
    "summarize",
    "update_after_response",
    "write_decision_log",
]
