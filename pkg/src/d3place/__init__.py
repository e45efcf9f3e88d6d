"""Deterministic block placement and repair planning for erasure-coded clusters."""

from .codes import (
    CodeScheme,
    Coder,
    LrcColumnAssignment,
    ReconstructionError,
    StripeGrouping,
    group_stripe,
    lrc_columns,
    mean_cross_rack_reads,
    parse_scheme,
)
from .metrics import (
    balance_report,
    fault_tolerance_check,
    min_cross_reads_oracle,
    uniformity_report,
)
from .migration import MigrationBatch, apply_migration, plan_migration
from .oa import (
    AddressingTable,
    OrthogonalArray,
    construct_oa,
    derive_addressing_table,
    max_columns,
    max_prefix_columns,
    verify_oa,
)
from .placement import (
    BlockAddress,
    ClusterConfig,
    ConfigError,
    PlacementMap,
    load_map,
    locate_block,
    node_class_counts,
    node_counts_csv,
    place_d3,
    place_hdd,
    place_rdd,
    place_regions_d3_lrc,
    place_regions_d3_rs,
    save_map,
    validate_config,
)
from .recovery import (
    RecoveryPlan,
    RecoveryStep,
    StripeRecovery,
    apply_recovery,
    execute_stripe_recovery,
    plan_degraded_read,
    plan_node_recovery,
    plan_stripe_case,
    plan_stripe_recovery_lrc,
    plan_stripe_recovery_rs,
    select_recovered_target,
)
from .simnet import (
    BandwidthModel,
    TrafficMatrix,
    accumulate_traffic,
    degraded_read_latency,
    load_imbalance,
    recovery_throughput,
    recovery_time,
)

__all__ = [
    "AddressingTable",
    "BandwidthModel",
    "BlockAddress",
    "ClusterConfig",
    "CodeScheme",
    "Coder",
    "ConfigError",
    "LrcColumnAssignment",
    "MigrationBatch",
    "OrthogonalArray",
    "PlacementMap",
    "ReconstructionError",
    "RecoveryPlan",
    "RecoveryStep",
    "StripeGrouping",
    "TrafficMatrix",
    "accumulate_traffic",
    "apply_migration",
    "apply_recovery",
    "balance_report",
    "construct_oa",
    "degraded_read_latency",
    "derive_addressing_table",
    "execute_stripe_recovery",
    "fault_tolerance_check",
    "group_stripe",
    "load_imbalance",
    "load_map",
    "locate_block",
    "lrc_columns",
    "max_columns",
    "max_prefix_columns",
    "mean_cross_rack_reads",
    "min_cross_reads_oracle",
    "node_class_counts",
    "node_counts_csv",
    "parse_scheme",
    "place_d3",
    "place_hdd",
    "place_rdd",
    "place_regions_d3_lrc",
    "place_regions_d3_rs",
    "plan_degraded_read",
    "plan_migration",
    "plan_node_recovery",
    "plan_stripe_case",
    "plan_stripe_recovery_lrc",
    "plan_stripe_recovery_rs",
    "recovery_throughput",
    "recovery_time",
    "save_map",
    "select_recovered_target",
    "uniformity_report",
    "validate_config",
    "verify_oa",
]

__version__ = "0.1.0"
