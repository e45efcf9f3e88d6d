"""Single-node failure recovery planning.

For the deterministic layout, each failed block is rebuilt from exactly one
group's worth of blocks per involved rack: inside every contributing rack the
node holding the highest-index selected block reads the others, folds them
into one partial block with the target's decode coefficients, and ships that
single block across racks. The repaired block lands either in the rack of a
surviving short group ("merged") or in a spare rack picked by the addressing
table's reserved column ("spare"), with node choice rules that keep read,
write, and compute loads level across every rack and node.

Baseline maps (rdd/hdd) are planned with their conventional policy: read k
whole blocks and ship them to a seeded random target, no aggregation.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterator, Sequence

from .codes import Coder, CodeScheme, StripeGrouping, xor_buf
from .placement import (
    BlockAddress,
    ClusterConfig,
    PlacementMap,
    Relocation,
    clone_map,
)

SPARE = -1  # target-group marker for "a fresh rack"

KIND_INNER_READ = "inner_read"
KIND_AGGREGATE = "aggregate"
KIND_CROSS_SEND = "cross_send"
KIND_DECODE = "decode"
KIND_WRITE = "write"

LABEL_MERGED = "merged"
LABEL_SPARE = "spare"
LABEL_BASELINE = "baseline"


class PlanError(ValueError):
    """Recovery request conflicts with the map's state or contract."""


@dataclass(frozen=True)
class RecoveryStep:
    kind: str
    stripe: int
    src: BlockAddress | None
    dst: BlockAddress | None
    nbytes: int
    block: int | None = None  # concrete block index for whole-block moves
    payload: str = "block"  # "block" | "aggregate"


@dataclass(frozen=True)
class CasePlan:
    """Stripe-level recovery decision, before any physical addressing.

    selected maps sender group -> ascending block indices to fold there;
    local_blocks are consumed inside the target group's own rack. target_group
    is SPARE when the repaired block must go to a rack the stripe does not
    touch. cross_reads counts block transfers that cross racks.
    """

    failed_group: int
    target_group: int
    selected: tuple[tuple[int, tuple[int, ...]], ...]
    local_blocks: tuple[int, ...]
    cross_reads: int

    @property
    def sources(self) -> tuple[int, ...]:
        picked = list(self.local_blocks)
        for _g, blocks in self.selected:
            picked.extend(blocks)
        return tuple(sorted(picked))


def plan_stripe_case(grouping: StripeGrouping, failed_block: int) -> CasePlan:
    """Choose sources, senders, and the target group for one failed block."""
    scheme = grouping.scheme
    length = scheme.length
    if not 0 <= failed_block < length:
        raise IndexError(f"block {failed_block} out of range")
    m, k = scheme.m, scheme.k
    a, b = grouping.a, grouping.b
    fg = grouping.group_of[failed_block]

    if b == 0:
        # All groups hold m blocks; every surviving group folds itself into
        # one partial and ships it to a fresh rack.
        senders = tuple(
            (g, grouping.members(g)) for g in range(grouping.n_g) if g != fg
        )
        return CasePlan(fg, SPARE, senders, (), len(senders))

    if b == m - 1:
        short = grouping.n_g - 1  # the single group with m-1 blocks
        if grouping.sizes[fg] == m:
            # Repair next to the short group: its blocks stay local, the
            # other full groups each ship one partial.
            senders = tuple(
                (g, grouping.members(g))
                for g in range(grouping.n_g)
                if g not in (fg, short)
            )
            return CasePlan(fg, short, senders, grouping.members(short), len(senders))
        # The short group lost its block: take the k lowest-index blocks of
        # the full groups (drop only the single highest) and ship to a fresh
        # rack. One extra cross transfer is unavoidable here.
        pool = [blk for g in range(grouping.n_g) if g != fg for blk in grouping.members(g)]
        picked = pool[:-1]
        senders = _group_selection(grouping, picked)
        return CasePlan(fg, SPARE, senders, (), len(senders))

    # 0 < b < m-1: at least two groups are short of m, so one of them can
    # absorb the repaired block. Target the highest-index short survivor and
    # top up its z local blocks with the k-z lowest-index blocks from the
    # remaining groups.
    candidates = [
        g
        for g in range(grouping.n_g)
        if g != fg and grouping.sizes[g] <= m - 1
    ]
    target = max(candidates)
    z = grouping.sizes[target]
    need = k - z
    if need <= 0:
        return CasePlan(fg, target, (), grouping.members(target)[:k], 0)
    pool = [
        blk
        for g in range(grouping.n_g)
        if g not in (fg, target)
        for blk in grouping.members(g)
    ]
    picked = pool[:need]
    senders = _group_selection(grouping, picked)
    return CasePlan(fg, target, senders, grouping.members(target), len(senders))


def _group_selection(
    grouping: StripeGrouping, picked: Sequence[int]
) -> tuple[tuple[int, tuple[int, ...]], ...]:
    by_group: dict[int, list[int]] = {}
    for blk in picked:
        by_group.setdefault(grouping.group_of[blk], []).append(blk)
    return tuple((g, tuple(sorted(blks))) for g, blks in sorted(by_group.items()))


@dataclass(frozen=True)
class GroupRead:
    """One rack's contribution: fold `blocks` at `compute_node`, send one."""

    group: int
    blocks: tuple[int, ...]
    compute_node: BlockAddress


@dataclass
class StripeRecovery:
    stripe: int
    failed_block: int
    sources: tuple[int, ...]
    aggregates: tuple[GroupRead, ...]
    local_blocks: tuple[int, ...]
    target: BlockAddress
    relabel: str
    region: int
    group: int
    cross_reads: int
    steps: tuple[RecoveryStep, ...]


@dataclass
class RecoveryPlan:
    config: ClusterConfig
    scheme: CodeScheme
    placer: str
    kind: str  # "node_recovery" | "degraded_read"
    failed: BlockAddress | None
    stripes: list[StripeRecovery]
    seed: int | None = None
    client: BlockAddress | None = None

    def steps(self) -> Iterator[RecoveryStep]:
        for sr in self.stripes:
            yield from sr.steps

    @property
    def cross_rack_blocks(self) -> int:
        return sum(1 for st in self.steps() if st.kind == KIND_CROSS_SEND)

    @property
    def cross_rack_bytes(self) -> int:
        return sum(st.nbytes for st in self.steps() if st.kind == KIND_CROSS_SEND)

    def to_json_dict(self) -> dict:
        return {
            "version": 1,
            "scheme": self.scheme.spec_str(),
            "placer": self.placer,
            "kind": self.kind,
            "failed": self.failed.spec_str() if self.failed else None,
            "client": self.client.spec_str() if self.client else None,
            "seed": self.seed,
            "steps": [
                {
                    "kind": st.kind,
                    "stripe": st.stripe,
                    "block": st.block,
                    "src": st.src.spec_str() if st.src else None,
                    "dst": st.dst.spec_str() if st.dst else None,
                    "bytes": st.nbytes,
                    "payload": st.payload,
                }
                for st in self.steps()
            ],
        }


def recovery_rack(table, region: int) -> int:
    """Spare rack for a region's repaired blocks: the table's last column."""
    row = table.rows[region % len(table.rows)]
    return row[table.cols - 1]


def _require_d3(pmap: PlacementMap) -> None:
    if not pmap.is_d3:
        raise PlanError(f"deterministic planning needs a d3 map, got {pmap.placer!r}")


def _spare_rank(pmap: PlacementMap, failed_node: BlockAddress, stripe: int) -> int:
    """Position of `stripe` among its region's stripes hit by the failure."""
    region = pmap.region_of(stripe)
    rank = 0
    for s in pmap.region_stripes(region):
        if s == stripe:
            return rank
        if failed_node in pmap.addresses[s]:
            rank += 1
    raise AssertionError("stripe not in its own region")


def select_recovered_target(
    pmap: PlacementMap,
    stripe: int,
    case: CasePlan,
    failed_block: int,
    rank: int | None = None,
) -> BlockAddress:
    """Physical address for the repaired block of one stripe.

    Merged case: one past the node holding the stripe's highest-index block
    in the target rack. Spare case: the region's reserved rack, nodes walked
    round-robin in stripe order over the region's affected stripes.
    """
    grouping, _node_oa, table = pmap.layout_tables()
    region = pmap.region_of(stripe)
    addr = pmap.addresses[stripe]
    nodes = pmap.config.nodes
    if case.target_group == SPARE:
        rack = recovery_rack(table, region)
        if rank is None:
            rank = _spare_rank(pmap, addr[failed_block], stripe)
        return BlockAddress(rack, rank % nodes)
    stored = grouping.members(case.target_group)
    rack = addr[stored[0]].rack
    last_node = addr[stored[-1]].node
    return BlockAddress(rack, (last_node + 1) % nodes)


def plan_stripe_recovery_rs(
    pmap: PlacementMap,
    stripe: int,
    failed_block: int,
    rank: int | None = None,
) -> StripeRecovery:
    _require_d3(pmap)
    if not pmap.scheme.is_rs:
        raise PlanError("rs planner on a non-rs map")
    grouping, _node_oa, table = pmap.layout_tables()
    case = plan_stripe_case(grouping, failed_block)
    addr = pmap.addresses[stripe]
    nbytes = pmap.config.block_size
    region = pmap.region_of(stripe)

    target = select_recovered_target(pmap, stripe, case, failed_block, rank=rank)
    relabel = LABEL_SPARE if case.target_group == SPARE else LABEL_MERGED

    steps: list[RecoveryStep] = []
    aggregates: list[GroupRead] = []
    for g, blocks in case.selected:
        compute = addr[blocks[-1]]
        for blk in blocks[:-1]:
            steps.append(
                RecoveryStep(KIND_INNER_READ, stripe, addr[blk], compute, nbytes, blk)
            )
        steps.append(
            RecoveryStep(KIND_AGGREGATE, stripe, None, compute, 0, payload="aggregate")
        )
        aggregates.append(GroupRead(group=g, blocks=blocks, compute_node=compute))
        if compute.rack == target.rack:
            raise AssertionError("sender and target rack coincide in a d3 plan")
        steps.append(
            RecoveryStep(
                KIND_CROSS_SEND, stripe, compute, target, nbytes, payload="aggregate"
            )
        )
    for blk in case.local_blocks:
        steps.append(
            RecoveryStep(KIND_INNER_READ, stripe, addr[blk], target, nbytes, blk)
        )
    steps.append(RecoveryStep(KIND_DECODE, stripe, None, target, 0))
    steps.append(RecoveryStep(KIND_WRITE, stripe, None, target, nbytes, failed_block))

    return StripeRecovery(
        stripe=stripe,
        failed_block=failed_block,
        sources=case.sources,
        aggregates=tuple(aggregates),
        local_blocks=case.local_blocks,
        target=target,
        relabel=relabel,
        region=region,
        group=case.failed_group,
        cross_reads=case.cross_reads,
        steps=tuple(steps),
    )


def lrc_reconstruction_set(scheme: CodeScheme, failed_block: int) -> tuple[int, ...]:
    cls = scheme.block_class(failed_block)
    if cls in ("data", "local"):
        grp = scheme.local_group_of(failed_block)
        return tuple(b for b in scheme.local_group_members(grp) if b != failed_block)
    return tuple(b for b in scheme.parity_blocks() if b != failed_block)


def plan_stripe_recovery_lrc(
    pmap: PlacementMap,
    stripe: int,
    failed_block: int,
    rank: int | None = None,
) -> StripeRecovery:
    _require_d3(pmap)
    if pmap.scheme.is_rs:
        raise PlanError("lrc planner on a non-lrc map")
    _cols, _node_oa, table = pmap.layout_tables()
    scheme = pmap.scheme
    addr = pmap.addresses[stripe]
    nbytes = pmap.config.block_size
    region = pmap.region_of(stripe)
    sources = lrc_reconstruction_set(scheme, failed_block)

    if rank is None:
        rank = _spare_rank(pmap, addr[failed_block], stripe)
    target = BlockAddress(recovery_rack(table, region), rank % pmap.config.nodes)

    steps: list[RecoveryStep] = []
    for blk in sources:
        src = addr[blk]
        if src.rack == target.rack:
            raise AssertionError("lrc source shares the spare rack")
        steps.append(RecoveryStep(KIND_CROSS_SEND, stripe, src, target, nbytes, blk))
    steps.append(RecoveryStep(KIND_DECODE, stripe, None, target, 0))
    steps.append(RecoveryStep(KIND_WRITE, stripe, None, target, nbytes, failed_block))

    return StripeRecovery(
        stripe=stripe,
        failed_block=failed_block,
        sources=tuple(sorted(sources)),
        aggregates=(),
        local_blocks=(),
        target=target,
        relabel=LABEL_SPARE,
        region=region,
        group=failed_block,  # region-group position == block position for lrc
        cross_reads=len(sources),
        steps=tuple(steps),
    )


def _baseline_stripe_plan(
    pmap: PlacementMap,
    stripe: int,
    failed_block: int,
    rng: random.Random,
) -> StripeRecovery:
    scheme = pmap.scheme
    addr = pmap.addresses[stripe]
    nbytes = pmap.config.block_size
    failed_node = addr[failed_block]
    if scheme.is_rs:
        survivors = [b for b in range(scheme.length) if b != failed_block]
        sources = sorted(rng.sample(survivors, scheme.k))
    else:
        sources = sorted(lrc_reconstruction_set(scheme, failed_block))
    taken = set(addr)
    candidates = [
        BlockAddress(rack, node)
        for rack in range(pmap.config.racks)
        for node in range(pmap.config.nodes)
        if BlockAddress(rack, node) not in taken
        and BlockAddress(rack, node) != failed_node
    ]
    target = rng.choice(candidates)
    steps = []
    cross = 0
    for blk in sources:
        src = addr[blk]
        if src.rack == target.rack:
            steps.append(RecoveryStep(KIND_INNER_READ, stripe, src, target, nbytes, blk))
        else:
            steps.append(RecoveryStep(KIND_CROSS_SEND, stripe, src, target, nbytes, blk))
            cross += 1
    steps.append(RecoveryStep(KIND_DECODE, stripe, None, target, 0))
    steps.append(RecoveryStep(KIND_WRITE, stripe, None, target, nbytes, failed_block))
    return StripeRecovery(
        stripe=stripe,
        failed_block=failed_block,
        sources=tuple(sources),
        aggregates=(),
        local_blocks=(),
        target=target,
        relabel=LABEL_BASELINE,
        region=pmap.region_of(stripe),
        group=-1,
        cross_reads=cross,
        steps=tuple(steps),
    )


def plan_node_recovery(
    pmap: PlacementMap, failed: BlockAddress, seed: int | None = None
) -> RecoveryPlan:
    """Plan repair of every block on one failed node."""
    if not (0 <= failed.rack < pmap.config.racks and 0 <= failed.node < pmap.config.nodes):
        raise PlanError(f"failed node {failed.spec_str()} outside the cluster")
    plans: list[StripeRecovery] = []
    if pmap.is_d3:
        per_region_rank: dict[int, int] = {}
        for s in range(pmap.num_stripes):
            addr = pmap.addresses[s]
            try:
                blk = addr.index(failed)
            except ValueError:
                continue
            region = pmap.region_of(s)
            rank = per_region_rank.get(region, 0)
            per_region_rank[region] = rank + 1
            if pmap.scheme.is_rs:
                plans.append(plan_stripe_recovery_rs(pmap, s, blk, rank=rank))
            else:
                plans.append(plan_stripe_recovery_lrc(pmap, s, blk, rank=rank))
    else:
        seed = 0 if seed is None else seed  # baselines always run seeded
        rng = random.Random(seed)
        for s in range(pmap.num_stripes):
            addr = pmap.addresses[s]
            try:
                blk = addr.index(failed)
            except ValueError:
                continue
            plans.append(_baseline_stripe_plan(pmap, s, blk, rng))
    return RecoveryPlan(
        config=pmap.config,
        scheme=pmap.scheme,
        placer=pmap.placer,
        kind="node_recovery",
        failed=failed,
        stripes=plans,
        seed=seed,
    )


def plan_degraded_read(
    pmap: PlacementMap,
    stripe: int,
    block: int,
    client: BlockAddress,
    seed: int | None = None,
) -> RecoveryPlan:
    """Rebuild one unavailable block at a client node.

    Same source selection as node recovery, but every contributing rack
    (including the one that would have absorbed the repaired block) folds its
    blocks locally and forwards a single partial to the client.
    """
    if not 0 <= stripe < pmap.num_stripes:
        raise IndexError(f"stripe {stripe} out of range")
    scheme = pmap.scheme
    addr = pmap.addresses[stripe]
    nbytes = pmap.config.block_size
    steps: list[RecoveryStep] = []
    aggregates: list[GroupRead] = []
    cross = 0

    if pmap.is_d3 and scheme.is_rs:
        grouping, _, _ = pmap.layout_tables()
        case = plan_stripe_case(grouping, block)
        senders = list(case.selected)
        if case.local_blocks:
            senders.append((case.target_group, case.local_blocks))
        sources = case.sources
        for g, blocks in senders:
            compute = addr[blocks[-1]]
            for blk in blocks[:-1]:
                steps.append(
                    RecoveryStep(KIND_INNER_READ, stripe, addr[blk], compute, nbytes, blk)
                )
            steps.append(
                RecoveryStep(KIND_AGGREGATE, stripe, None, compute, 0, payload="aggregate")
            )
            aggregates.append(GroupRead(group=g, blocks=blocks, compute_node=compute))
            if compute.rack == client.rack:
                if compute != client:  # folded in place when the client computes
                    steps.append(
                        RecoveryStep(
                            KIND_INNER_READ, stripe, compute, client, nbytes,
                            payload="aggregate",
                        )
                    )
            else:
                steps.append(
                    RecoveryStep(
                        KIND_CROSS_SEND, stripe, compute, client, nbytes,
                        payload="aggregate",
                    )
                )
                cross += 1
    else:
        if pmap.is_d3:
            sources = tuple(sorted(lrc_reconstruction_set(scheme, block)))
        else:
            rng = random.Random(0 if seed is None else seed)
            if scheme.is_rs:
                survivors = [b for b in range(scheme.length) if b != block]
                sources = tuple(sorted(rng.sample(survivors, scheme.k)))
            else:
                sources = tuple(sorted(lrc_reconstruction_set(scheme, block)))
        for blk in sources:
            src = addr[blk]
            if src == client:
                continue  # already on the client's own disk
            if src.rack == client.rack:
                steps.append(RecoveryStep(KIND_INNER_READ, stripe, src, client, nbytes, blk))
            else:
                steps.append(RecoveryStep(KIND_CROSS_SEND, stripe, src, client, nbytes, blk))
                cross += 1
    steps.append(RecoveryStep(KIND_DECODE, stripe, None, client, 0))

    sr = StripeRecovery(
        stripe=stripe,
        failed_block=block,
        sources=tuple(sources),
        aggregates=tuple(aggregates),
        local_blocks=(),
        target=client,
        relabel=LABEL_BASELINE,
        region=pmap.region_of(stripe),
        group=-1,
        cross_reads=cross,
        steps=tuple(steps),
    )
    return RecoveryPlan(
        config=pmap.config,
        scheme=pmap.scheme,
        placer=pmap.placer,
        kind="degraded_read",
        failed=None,
        stripes=[sr],
        seed=seed,
        client=client,
    )


def apply_recovery(pmap: PlacementMap, plan: RecoveryPlan) -> PlacementMap:
    """Re-address every repaired block; returns a new map."""
    if plan.kind != "node_recovery":
        raise PlanError("only node-recovery plans can be applied to a map")
    out = clone_map(pmap)
    for sr in plan.stripes:
        current = out.addresses[sr.stripe][sr.failed_block]
        if current != plan.failed:
            raise PlanError(
                f"stripe {sr.stripe} block {sr.failed_block} is at "
                f"{current.spec_str()}, not on the failed node"
            )
        if sr.target in out.addresses[sr.stripe]:
            raise PlanError(
                f"target {sr.target.spec_str()} already holds a block of "
                f"stripe {sr.stripe}"
            )
        out.addresses[sr.stripe][sr.failed_block] = sr.target
        out.relocations[(sr.stripe, sr.failed_block)] = Relocation(
            label=sr.relabel, region=sr.region, group=sr.group
        )
    if plan.stripes:
        out.failed_node = plan.failed
    if pmap.is_d3:
        _check_post_recovery(out)
    return out


def _check_post_recovery(pmap: PlacementMap) -> None:
    cap = pmap.scheme.m if pmap.scheme.is_rs else 1
    for s, stripe in enumerate(pmap.addresses):
        if len(set(stripe)) != len(stripe):
            raise AssertionError(f"stripe {s} shares a node after recovery")
        per_rack: dict[int, int] = {}
        for a in stripe:
            per_rack[a.rack] = per_rack.get(a.rack, 0) + 1
            if per_rack[a.rack] > cap:
                raise AssertionError(f"stripe {s} overfills rack {a.rack}")


def execute_stripe_recovery(
    sr: StripeRecovery, coder: Coder, blocks: Sequence[bytes]
) -> bytes:
    """Run one stripe's plan on real payloads; returns the rebuilt block.

    Partials are folded where the plan folds them and merged at the target,
    mirroring the transfer pipeline byte for byte.
    """
    sources = sr.sources
    size = len(blocks[0])
    if sr.aggregates:
        acc = bytes(size)
        for agg in sr.aggregates:
            part = coder.aggregate_partial(
                {b: blocks[b] for b in agg.blocks}, sources, sr.failed_block
            )
            acc = xor_buf(acc, part)
        if sr.local_blocks:
            acc = xor_buf(
                acc,
                coder.aggregate_partial(
                    {b: blocks[b] for b in sr.local_blocks}, sources, sr.failed_block
                ),
            )
        return acc
    return coder.decode_from({b: blocks[b] for b in sources}, sr.failed_block)
