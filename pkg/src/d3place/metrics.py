"""Exact audits: uniformity, fault tolerance, repair balance, minimality.

Every report here counts, never samples, and compares with integer or
rational arithmetic. The brute-force oracle enumerates every rack-grouping of
a small stripe and every repair strategy consistent with surviving a whole
rack loss, so it independently pins down the least possible average number of
cross-rack blocks per repair.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .codes import CodeScheme, mean_cross_rack_reads
from .placement import PlacementMap, node_class_counts
from .recovery import RecoveryPlan
from .simnet import TrafficMatrix, accumulate_traffic


@dataclass(frozen=True)
class UniformityReport:
    classes: tuple[str, ...]
    counts: dict[str, list[list[int]]]
    per_class_equal: dict[str, bool]
    within_rack_equal: dict[str, bool]

    @property
    def passed(self) -> bool:
        return all(self.per_class_equal.values())

    @property
    def rack_local_passed(self) -> bool:
        return all(self.within_rack_equal.values())

    def to_csv(self) -> str:
        lines = ["class,rack,node,count"]
        for cls, grid in self.counts.items():
            for rack, row in enumerate(grid):
                for node, count in enumerate(row):
                    lines.append(f"{cls},{rack},{node},{count}")
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        return {
            "classes": list(self.classes),
            "counts": self.counts,
            "per_class_equal": self.per_class_equal,
            "within_rack_equal": self.within_rack_equal,
            "passed": self.passed,
        }


def uniformity_report(pmap: PlacementMap) -> UniformityReport:
    counts = node_class_counts(pmap)
    per_class_equal = {}
    within_rack_equal = {}
    for cls, grid in counts.items():
        flat = [c for row in grid for c in row]
        per_class_equal[cls] = len(set(flat)) == 1
        within_rack_equal[cls] = all(len(set(row)) == 1 for row in grid)
    return UniformityReport(
        classes=tuple(counts),
        counts=counts,
        per_class_equal=per_class_equal,
        within_rack_equal=within_rack_equal,
    )


@dataclass(frozen=True)
class FaultToleranceReport:
    passed: bool
    violations: tuple[str, ...]
    rack_erasures_checked: int
    node_erasures_checked: int

    def to_json_dict(self) -> dict:
        return {
            "passed": self.passed,
            "violations": list(self.violations),
            "rack_erasures_checked": self.rack_erasures_checked,
            "node_erasures_checked": self.node_erasures_checked,
        }


def fault_tolerance_check(
    pmap: PlacementMap, enumerate_erasures: bool = False, max_enumeration: int = 200_000
) -> FaultToleranceReport:
    """Check that every stripe outlives one rack loss or a full node-set loss.

    The structural form verifies distinct nodes per stripe and the per-rack
    cap. With enumerate_erasures the rack erasures are always swept literally
    and the m-node erasures too while the subset count stays reasonable.
    """
    scheme = pmap.scheme
    cap = scheme.m if scheme.is_rs else 1
    need = scheme.k if scheme.is_rs else None
    violations: list[str] = []
    for s, stripe in enumerate(pmap.addresses):
        if len(set(stripe)) != len(stripe):
            violations.append(f"stripe {s}: two blocks share a node")
        per_rack: dict[int, int] = {}
        for a in stripe:
            per_rack[a.rack] = per_rack.get(a.rack, 0) + 1
        worst = max(per_rack.values())
        if worst > cap:
            violations.append(f"stripe {s}: {worst} blocks in one rack (cap {cap})")

    rack_erasures = 0
    node_erasures = 0
    if enumerate_erasures and not violations:
        length = scheme.length
        ids = np.array(
            [[a.rack * pmap.config.nodes + a.node for a in st] for st in pmap.addresses],
            dtype=np.int64,
        )
        racks = np.array([[a.rack for a in st] for st in pmap.addresses], dtype=np.int64)
        for rack in range(pmap.config.racks):
            lost = (racks == rack).sum(axis=1)
            rack_erasures += 1
            if scheme.is_rs:
                bad = np.nonzero(length - lost < need)[0]
            else:
                bad = np.nonzero(lost > 1)[0]
            if bad.size:
                violations.append(
                    f"rack {rack} erasure breaks stripe {int(bad[0])}"
                )
        if scheme.is_rs:
            total = pmap.config.total_nodes
            m = scheme.m
            import math

            if math.comb(total, m) <= max_enumeration:
                per_node = np.zeros((pmap.num_stripes, total), dtype=np.int64)
                np.add.at(
                    per_node,
                    (np.repeat(np.arange(pmap.num_stripes), length), ids.ravel()),
                    1,
                )
                subsets = list(itertools.combinations(range(total), m))
                indicator = np.zeros((total, len(subsets)), dtype=np.int64)
                for col, subset in enumerate(subsets):
                    indicator[list(subset), col] = 1
                losses = per_node @ indicator
                node_erasures = len(subsets)
                if (losses > m).any():
                    where = np.argwhere(losses > m)[0]
                    violations.append(
                        f"node erasure {subsets[int(where[1])]} breaks "
                        f"stripe {int(where[0])}"
                    )
    return FaultToleranceReport(
        passed=not violations,
        violations=tuple(violations),
        rack_erasures_checked=rack_erasures,
        node_erasures_checked=node_erasures,
    )


_ORACLE_MAX_LEN = 6


def _partitions_with_cap(total: int, cap: int, floor: int = 1):
    """Non-increasing integer partitions of total with parts <= cap."""
    if total == 0:
        yield ()
        return
    for first in range(min(total, cap), floor - 1, -1):
        for rest in _partitions_with_cap(total - first, first, floor):
            yield (first,) + rest


def min_cross_reads_oracle(scheme: CodeScheme) -> Fraction:
    """Least achievable average cross-rack blocks per single-block repair.

    Enumerates every rack grouping (parts capped at m so one rack loss stays
    recoverable), every target rack that can legally absorb the repaired
    block, and every subset of racks contributing one folded transfer each.
    Exact rational result; only tractable for short stripes.
    """
    if not scheme.is_rs:
        raise ValueError("oracle defined for rs schemes")
    length, k, m = scheme.length, scheme.k, scheme.m
    if length > _ORACLE_MAX_LEN:
        raise ValueError(f"stripe size {length} exceeds oracle limit {_ORACLE_MAX_LEN}")
    best: Fraction | None = None
    for parts in _partitions_with_cap(length, m):
        total_reads = 0
        for failed_idx, failed_part in enumerate(parts):
            others = list(parts[:failed_idx]) + list(parts[failed_idx + 1 :])
            local_options = [parts[failed_idx] - 1] + others + [0]  # racks + fresh one
            best_x = None
            for t, available_local in enumerate(local_options):
                if available_local > m - 1:
                    continue  # target rack may not already hold m blocks
                donors = [failed_part - 1] + others
                if t < len(local_options) - 1:
                    donors = donors[:t] + donors[t + 1 :]
                needed = k - available_local
                if needed <= 0:
                    best_x = 0 if best_x is None else min(best_x, 0)
                    continue
                for size in range(1, len(donors) + 1):
                    feasible = any(
                        sum(combo) >= needed
                        for combo in itertools.combinations(donors, size)
                    )
                    if feasible:
                        best_x = size if best_x is None else min(best_x, size)
                        break
            if best_x is None:
                raise AssertionError("layout admits no repair strategy")
            total_reads += failed_part * best_x
        value = Fraction(total_reads, length)
        if best is None or value < best:
            best = value
    assert best is not None
    return best


def oracle_matches_formula(scheme: CodeScheme) -> bool:
    return min_cross_reads_oracle(scheme) == mean_cross_rack_reads(scheme)


@dataclass(frozen=True)
class BalanceReport:
    traffic: TrafficMatrix
    cross_read_bytes_equal: bool  # surviving up-ports all equal
    cross_write_bytes_equal: bool  # surviving down-ports all equal
    within_rack_reads_equal: bool
    within_rack_writes_equal: bool
    within_rack_computes_equal: bool
    nodes_reads_equal: bool  # across every node of every surviving rack
    nodes_writes_equal: bool
    nodes_computes_equal: bool

    @property
    def rack_level_passed(self) -> bool:
        return self.cross_read_bytes_equal and self.cross_write_bytes_equal

    @property
    def node_level_passed(self) -> bool:
        return (
            self.within_rack_reads_equal
            and self.within_rack_writes_equal
            and self.within_rack_computes_equal
        )

    @property
    def passed(self) -> bool:
        return self.rack_level_passed and self.node_level_passed

    def to_json_dict(self) -> dict:
        return {
            "cross_read_bytes_equal": self.cross_read_bytes_equal,
            "cross_write_bytes_equal": self.cross_write_bytes_equal,
            "within_rack_reads_equal": self.within_rack_reads_equal,
            "within_rack_writes_equal": self.within_rack_writes_equal,
            "within_rack_computes_equal": self.within_rack_computes_equal,
            "nodes_reads_equal": self.nodes_reads_equal,
            "nodes_writes_equal": self.nodes_writes_equal,
            "nodes_computes_equal": self.nodes_computes_equal,
            "passed": self.passed,
        }

    def to_csv(self) -> str:
        t = self.traffic
        lines = ["rack,node,up_bytes,down_bytes,reads,writes,computes"]
        for rack in range(t.racks):
            lines.append(f"{rack},,{t.up[rack]},{t.down[rack]},,,")
            for node in range(t.nodes):
                lines.append(
                    f"{rack},{node},,,{t.reads[rack][node]},"
                    f"{t.writes[rack][node]},{t.computes[rack][node]}"
                )
        return "\n".join(lines) + "\n"


def balance_report(plan: RecoveryPlan) -> BalanceReport:
    traffic = accumulate_traffic(plan)
    excluded = traffic.excluded_rack
    surviving = [r for r in range(traffic.racks) if r != excluded]

    def within_rack(grid) -> bool:
        return all(len(set(grid[r])) == 1 for r in surviving)

    def across_nodes(grid) -> bool:
        values = {grid[r][n] for r in surviving for n in range(traffic.nodes)}
        return len(values) == 1

    return BalanceReport(
        traffic=traffic,
        cross_read_bytes_equal=len({traffic.up[r] for r in surviving}) == 1,
        cross_write_bytes_equal=len({traffic.down[r] for r in surviving}) == 1,
        within_rack_reads_equal=within_rack(traffic.reads),
        within_rack_writes_equal=within_rack(traffic.writes),
        within_rack_computes_equal=within_rack(traffic.computes),
        nodes_reads_equal=across_nodes(traffic.reads),
        nodes_writes_equal=across_nodes(traffic.writes),
        nodes_computes_equal=across_nodes(traffic.computes),
    )
