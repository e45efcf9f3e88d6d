"""Traffic accounting and the two-tier bandwidth model.

The cluster is modeled as full-duplex rack ports behind a core router plus an
inner-rack link per node. A plan's steps are tallied into per-port directional
byte counts and per-node inner-rack byte counts, from which the bottleneck
time, throughput, the degraded-read latency, and the load-imbalance metric
follow. Everything is integer byte arithmetic until the final division, so
equal loads compare exactly equal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

from .recovery import (
    KIND_AGGREGATE,
    KIND_CROSS_SEND,
    KIND_DECODE,
    KIND_INNER_READ,
    KIND_WRITE,
    RecoveryPlan,
)


class BandwidthModel(NamedTuple):
    inner_mbps: float
    cross_mbps: float

    @property
    def inner_bytes_per_s(self) -> float:
        return self.inner_mbps * 1e6 / 8

    @property
    def cross_bytes_per_s(self) -> float:
        return self.cross_mbps * 1e6 / 8


@dataclass
class TrafficMatrix:
    racks: int
    nodes: int
    excluded_rack: int | None
    up: list[int] = field(default_factory=list)  # bytes leaving each rack port
    down: list[int] = field(default_factory=list)
    inner_in: list[list[int]] = field(default_factory=list)
    inner_out: list[list[int]] = field(default_factory=list)
    reads: list[list[int]] = field(default_factory=list)  # blocks read from disk
    writes: list[list[int]] = field(default_factory=list)
    computes: list[list[int]] = field(default_factory=list)

    def __post_init__(self):
        if not self.up:
            self.up = [0] * self.racks
            self.down = [0] * self.racks
            self.inner_in = [[0] * self.nodes for _ in range(self.racks)]
            self.inner_out = [[0] * self.nodes for _ in range(self.racks)]
            self.reads = [[0] * self.nodes for _ in range(self.racks)]
            self.writes = [[0] * self.nodes for _ in range(self.racks)]
            self.computes = [[0] * self.nodes for _ in range(self.racks)]

    @property
    def cross_bytes(self) -> int:
        return sum(self.up)

    def surviving_port_loads(self) -> list[int]:
        return [
            load
            for rack in range(self.racks)
            if rack != self.excluded_rack
            for load in (self.up[rack], self.down[rack])
        ]

    def to_csv(self) -> str:
        lines = ["port_or_node,direction,bytes"]
        for rack in range(self.racks):
            lines.append(f"rack{rack},up,{self.up[rack]}")
            lines.append(f"rack{rack},down,{self.down[rack]}")
        for rack in range(self.racks):
            for node in range(self.nodes):
                lines.append(f"r{rack}:n{node},inner_in,{self.inner_in[rack][node]}")
                lines.append(f"r{rack}:n{node},inner_out,{self.inner_out[rack][node]}")
        return "\n".join(lines) + "\n"


def accumulate_traffic(plan: RecoveryPlan) -> TrafficMatrix:
    """Tally every step onto ports and node links.

    Disk-read counts attribute each whole block to the node it is read from;
    an aggregate consumes exactly one block co-located with its compute node,
    the rest arrive as inner reads.
    """
    excluded = plan.failed.rack if plan.failed is not None else None
    t = TrafficMatrix(
        racks=plan.config.racks, nodes=plan.config.nodes, excluded_rack=excluded
    )
    for st in plan.steps():
        if st.kind == KIND_CROSS_SEND:
            if st.src.rack == st.dst.rack:
                raise ValueError("cross_send within one rack")
            t.up[st.src.rack] += st.nbytes
            t.down[st.dst.rack] += st.nbytes
            if st.payload == "block":
                t.reads[st.src.rack][st.src.node] += 1
        elif st.kind == KIND_INNER_READ:
            if st.src.rack != st.dst.rack:
                raise ValueError("inner_read across racks")
            t.inner_out[st.src.rack][st.src.node] += st.nbytes
            t.inner_in[st.dst.rack][st.dst.node] += st.nbytes
            if st.payload == "block":
                t.reads[st.src.rack][st.src.node] += 1
        elif st.kind == KIND_AGGREGATE:
            t.computes[st.dst.rack][st.dst.node] += 1
            t.reads[st.dst.rack][st.dst.node] += 1
        elif st.kind == KIND_DECODE:
            t.computes[st.dst.rack][st.dst.node] += 1
        elif st.kind == KIND_WRITE:
            t.writes[st.dst.rack][st.dst.node] += 1
        else:
            raise ValueError(f"unknown step kind {st.kind!r}")
    if sum(t.up) != sum(t.down):
        raise AssertionError("cross-rack byte conservation broken")
    return t


def load_imbalance(traffic: TrafficMatrix) -> float:
    """(max - mean) / mean over the surviving racks' directional port loads."""
    loads = traffic.surviving_port_loads()
    total = sum(loads)
    if total == 0:
        raise ValueError("load imbalance undefined for an all-zero load")
    peak = max(loads)
    if peak * len(loads) == total:
        return 0.0
    mean = total / len(loads)
    return (peak - mean) / mean


def recovery_time(traffic: TrafficMatrix, bandwidth: BandwidthModel) -> float:
    """Bottleneck completion time over ports and node links."""
    cross = bandwidth.cross_bytes_per_s
    inner = bandwidth.inner_bytes_per_s
    worst = 0.0
    for rack in range(traffic.racks):
        worst = max(worst, traffic.up[rack] / cross, traffic.down[rack] / cross)
        for node in range(traffic.nodes):
            volume = traffic.inner_in[rack][node] + traffic.inner_out[rack][node]
            worst = max(worst, volume / inner)
    return worst


def recovery_throughput(failed_bytes: int, seconds: float) -> float:
    if seconds <= 0:
        raise ValueError("throughput undefined for zero recovery time")
    return failed_bytes / seconds


def degraded_read_latency(plan: RecoveryPlan, bandwidth: BandwidthModel) -> float:
    """Two sequential stages: parallel in-rack staging, then the client link.

    Stage one runs the inner-rack reads and aggregation in every source rack
    in parallel (bounded by the busiest rack's inner volume); stage two
    serializes the cross-rack transfers on the client's downlink.
    """
    if plan.kind != "degraded_read":
        raise ValueError("latency model applies to degraded-read plans")
    inner_per_rack: dict[int, int] = {}
    cross_bytes = 0
    for st in plan.steps():
        if st.kind == KIND_INNER_READ:
            inner_per_rack[st.src.rack] = inner_per_rack.get(st.src.rack, 0) + st.nbytes
        elif st.kind == KIND_CROSS_SEND:
            cross_bytes += st.nbytes
    stage1 = (
        max(inner_per_rack.values()) / bandwidth.inner_bytes_per_s
        if inner_per_rack
        else 0.0
    )
    stage2 = cross_bytes / bandwidth.cross_bytes_per_s
    return stage1 + stage2
