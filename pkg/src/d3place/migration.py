"""Batch migration of repaired blocks back to the replacement node.

After a node recovery the repaired blocks sit spread over other racks. Once a
replacement node comes online in the failed slot, migration pulls them home
batch by batch: one batch per originating region-group position, each batch
drawing the same number of blocks from each of r-1 distinct racks, so no
single rack port is hammered. Applying every batch restores the canonical
deterministic layout exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from .placement import BlockAddress, PlacementMap, clone_map
from .recovery import LABEL_SPARE, PlanError


class BlockMove(NamedTuple):
    stripe: int
    block: int
    src: BlockAddress
    dst: BlockAddress


@dataclass(frozen=True)
class MigrationBatch:
    index: int
    group_type: int  # region-group position whose blocks this batch returns
    label: str
    regions: tuple[int, ...]
    moves: tuple[BlockMove, ...]
    nbytes: int

    @property
    def block_count(self) -> int:
        return len(self.moves)

    def source_rack_counts(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for move in self.moves:
            counts[move.src.rack] = counts.get(move.src.rack, 0) + 1
        return dict(sorted(counts.items()))


def plan_migration(pmap: PlacementMap, relived: BlockAddress) -> list[MigrationBatch]:
    """Order every repaired block's move back to the relived node.

    The relived node takes over the failed node's slot, so it must carry the
    same address. Batches are ordered spare-rack groups first (freeing the
    reserve racks), then merged groups by ascending position.
    """
    if not pmap.is_d3:
        raise PlanError("migration planning needs a d3 map")
    if not pmap.relocations:
        return []
    if pmap.failed_node is None:
        raise PlanError("map has relocations but no failed node recorded")
    if relived != pmap.failed_node:
        raise PlanError(
            f"relived node {relived.spec_str()} must take the failed slot "
            f"{pmap.failed_node.spec_str()}"
        )

    by_type: dict[int, list[tuple[int, int]]] = {}
    labels: dict[int, str] = {}
    regions: dict[int, set[int]] = {}
    for (stripe, block), rel in pmap.relocations.items():
        by_type.setdefault(rel.group, []).append((stripe, block))
        labels[rel.group] = rel.label
        regions.setdefault(rel.group, set()).add(rel.region)

    spare_types = sorted(g for g, lbl in labels.items() if lbl == LABEL_SPARE)
    merged_types = sorted(g for g in labels if g not in spare_types)
    batches = []
    for index, group_type in enumerate(spare_types + merged_types):
        moves = tuple(
            BlockMove(s, b, pmap.addresses[s][b], relived)
            for s, b in sorted(by_type[group_type])
        )
        batches.append(
            MigrationBatch(
                index=index,
                group_type=group_type,
                label=labels[group_type],
                regions=tuple(sorted(regions[group_type])),
                moves=moves,
                nbytes=len(moves) * pmap.config.block_size,
            )
        )
    return batches


def apply_migration(pmap: PlacementMap, batches) -> PlacementMap:
    """Execute the moves; the result is the canonical pre-failure layout."""
    out = clone_map(pmap)
    for batch in batches:
        for move in batch.moves:
            current = out.addresses[move.stripe][move.block]
            if current != move.src:
                raise PlanError(
                    f"stripe {move.stripe} block {move.block} moved since "
                    f"planning: at {current.spec_str()}, expected "
                    f"{move.src.spec_str()}"
                )
            out.addresses[move.stripe][move.block] = move.dst
            out.relocations.pop((move.stripe, move.block), None)
    if not out.relocations:
        out.failed_node = None
    return out


def migration_csv(batches) -> str:
    lines = ["batch,group_type,label,blocks,bytes,source_racks"]
    for batch in batches:
        sources = ";".join(
            f"r{rack}:{count}" for rack, count in batch.source_rack_counts().items()
        )
        lines.append(
            f"{batch.index},{batch.group_type},{batch.label},"
            f"{batch.block_count},{batch.nbytes},{sources}"
        )
    return "\n".join(lines) + "\n"


def batches_to_json_dict(batches) -> dict:
    return {
        "version": 1,
        "batches": [
            {
                "batch": batch.index,
                "group_type": batch.group_type,
                "label": batch.label,
                "regions": list(batch.regions),
                "bytes": batch.nbytes,
                "moves": [
                    {
                        "stripe": move.stripe,
                        "block": move.block,
                        "src": move.src.spec_str(),
                        "dst": move.dst.spec_str(),
                    }
                    for move in batch.moves
                ],
            }
            for batch in batches
        ],
    }
