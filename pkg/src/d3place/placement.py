"""Block placement over a rack/node cluster.

Three placers share one map format:

  d3   deterministic layout driven by two orthogonal arrays: a node-level
       OA(n, .) spreads a region of n^2 stripes inside each rack, and an
       addressing table cut from an OA(r, .) spreads r(r-1) regions over the
       racks. Per stripe, rack j holds exactly group j of the stripe (one
       block per rack for LRC).
  rdd  seeded uniform random choice of distinct nodes, resampled until the
       per-rack cap holds.
  hdd  pseudo-random but deterministic hashing of (seed, stripe, block) to a
       node, reselecting with an attempt counter on collision, cap violation,
       or a failed node.

Maps serialize to a versioned JSON document and record their provenance so
any downstream number can be reproduced from the file alone.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from typing import Iterator, NamedTuple

from .codes import (
    CodeScheme,
    LrcColumnAssignment,
    StripeGrouping,
    group_stripe,
    lrc_columns,
    parse_scheme,
)
from .oa import (
    AddressingTable,
    OrthogonalArray,
    construct_oa,
    derive_addressing_table,
    max_prefix_columns,
)

import random

MAP_FORMAT_VERSION = 1

_ADDR_RE = re.compile(r"^r(\d+):n(\d+)$")


class ConfigError(ValueError):
    """Cluster/scheme combination cannot be placed."""


class BlockAddress(NamedTuple):
    rack: int
    node: int

    def spec_str(self) -> str:
        return f"r{self.rack}:n{self.node}"

    @staticmethod
    def parse(text: str) -> "BlockAddress":
        match = _ADDR_RE.match(text.strip())
        if not match:
            raise ValueError(f"bad address {text!r}, expected rRACK:nNODE")
        return BlockAddress(int(match.group(1)), int(match.group(2)))


@dataclass(frozen=True)
class ClusterConfig:
    racks: int
    nodes: int
    inner_mbps: float = 1000.0
    cross_mbps: float = 100.0
    block_size: int = 16_000_000  # bytes; 16 MB at 10^6 bytes/MB

    def __post_init__(self):
        if self.racks < 2:
            raise ValueError("need at least two racks")
        if self.nodes < 1:
            raise ValueError("need at least one node per rack")
        if self.inner_mbps <= 0 or self.cross_mbps <= 0:
            raise ValueError("bandwidths must be positive")
        if self.block_size <= 0:
            raise ValueError("block size must be positive")

    @property
    def total_nodes(self) -> int:
        return self.racks * self.nodes


class Relocation(NamedTuple):
    """Where a repaired block ended up, and which region-group it joined."""

    label: str  # "merged" into an existing rack | "spare" rack | "baseline"
    region: int  # global region index
    group: int  # region-group position that failed (placer-specific)


def validate_config(config: ClusterConfig, scheme: CodeScheme) -> list[str]:
    """All reasons the scheme cannot be laid out deterministically; [] if ok."""
    problems: list[str] = []
    r, n = config.racks, config.nodes
    if scheme.is_rs:
        grouping = group_stripe(scheme)
        n_g = grouping.n_g
        if n < scheme.m:
            problems.append(f"nodes per rack {n} < parity count {scheme.m}")
        if n_g > max_prefix_columns(n):
            problems.append(
                f"node array needs {n_g} columns but OA({n}, .) supports "
                f"{max_prefix_columns(n)} with constant leading rows"
            )
        if r <= n_g:
            problems.append(f"rack count {r} must exceed group count {n_g}")
        if n_g + 1 > max_prefix_columns(r):
            problems.append(
                f"rack array needs {n_g + 1} columns but OA({r}, .) supports "
                f"{max_prefix_columns(r)} with constant leading rows"
            )
    else:
        cols = lrc_columns(scheme)
        length = scheme.length
        if cols.n_cols > max_prefix_columns(n):
            problems.append(
                f"node array needs {cols.n_cols} columns but OA({n}, .) "
                f"supports {max_prefix_columns(n)} with constant leading rows"
            )
        if r <= length:
            problems.append(f"rack count {r} must exceed stripe size {length}")
        if length + 1 > max_prefix_columns(r):
            problems.append(
                f"rack array needs {length + 1} columns but OA({r}, .) "
                f"supports {max_prefix_columns(r)} with constant leading rows"
            )
    return problems


@dataclass
class PlacementMap:
    config: ClusterConfig
    scheme: CodeScheme
    placer: str  # "d3" | "rdd" | "hdd"
    seed: int | None
    addresses: list[list[BlockAddress]]
    failed_node: BlockAddress | None = None
    relocations: dict[tuple[int, int], Relocation] = field(default_factory=dict)

    @property
    def num_stripes(self) -> int:
        return len(self.addresses)

    @property
    def stripes_per_region(self) -> int:
        return self.config.nodes**2

    @property
    def regions_per_cycle(self) -> int:
        return self.config.racks * (self.config.racks - 1)

    @property
    def stripes_per_cycle(self) -> int:
        return self.stripes_per_region * self.regions_per_cycle

    @property
    def is_d3(self) -> bool:
        return self.placer == "d3"

    def region_of(self, stripe: int) -> int:
        return stripe // self.stripes_per_region

    def row_in_region(self, stripe: int) -> int:
        return stripe % self.stripes_per_region

    def region_stripes(self, region: int) -> range:
        start = region * self.stripes_per_region
        return range(start, min(start + self.stripes_per_region, self.num_stripes))

    def layout_tables(self):
        if not self.is_d3:
            raise ValueError("layout tables exist only for d3 maps")
        return _d3_tables(self.config, self.scheme)

    def iter_blocks(self) -> Iterator[tuple[int, int, BlockAddress]]:
        for s, stripe in enumerate(self.addresses):
            for b, addr in enumerate(stripe):
                yield s, b, addr

    def blocks_on(self, node: BlockAddress) -> list[tuple[int, int]]:
        return [(s, b) for s, b, addr in self.iter_blocks() if addr == node]


_D3_TABLE_CACHE: dict = {}


def _d3_tables(
    config: ClusterConfig, scheme: CodeScheme
) -> tuple[StripeGrouping | LrcColumnAssignment, OrthogonalArray, AddressingTable]:
    key = (config.racks, config.nodes, scheme)
    cached = _D3_TABLE_CACHE.get(key)
    if cached is not None:
        return cached
    if scheme.is_rs:
        layout: StripeGrouping | LrcColumnAssignment = group_stripe(scheme)
        node_cols = layout.n_g
        region_groups = layout.n_g
    else:
        layout = lrc_columns(scheme)
        node_cols = layout.n_cols
        region_groups = scheme.length
    node_oa = construct_oa(config.nodes, node_cols)
    rack_oa = construct_oa(config.racks, region_groups + 1)
    table = derive_addressing_table(rack_oa, region_groups)
    result = (layout, node_oa, table)
    _D3_TABLE_CACHE[key] = result
    return result


def _rs_stripe_addresses(
    oa_row, grouping: StripeGrouping, rack_of_group, nodes: int
) -> list[BlockAddress]:
    out = []
    for block in range(grouping.scheme.length):
        g = grouping.group_of[block]
        offset = grouping.offset_in_group[block]
        out.append(BlockAddress(rack_of_group[g], (oa_row[g] + offset) % nodes))
    return out


def _lrc_stripe_addresses(
    oa_row, cols: LrcColumnAssignment, rack_of_block, _nodes: int
) -> list[BlockAddress]:
    return [
        BlockAddress(rack_of_block[b], oa_row[cols.col_of[b]])
        for b in range(cols.scheme.length)
    ]


def place_d3(config: ClusterConfig, scheme: CodeScheme, num_stripes: int) -> PlacementMap:
    """Deterministic layout for any stripe count (regions may be partial)."""
    if num_stripes < 1:
        raise ValueError("need at least one stripe")
    problems = validate_config(config, scheme)
    if problems:
        raise ConfigError("; ".join(problems))
    layout, node_oa, table = _d3_tables(config, scheme)
    per_region = config.nodes**2
    per_cycle = config.racks * (config.racks - 1)
    addresses = []
    for s in range(num_stripes):
        row = table.rows[(s // per_region) % per_cycle]
        oa_row = node_oa.rows[s % per_region]
        if scheme.is_rs:
            addresses.append(
                _rs_stripe_addresses(oa_row, layout, row, config.nodes)
            )
        else:
            addresses.append(
                _lrc_stripe_addresses(oa_row, layout, row, config.nodes)
            )
    return PlacementMap(
        config=config, scheme=scheme, placer="d3", seed=None, addresses=addresses
    )


def place_regions_d3_rs(
    config: ClusterConfig, scheme: CodeScheme, num_regions: int
) -> PlacementMap:
    if not scheme.is_rs:
        raise ValueError("rs scheme required")
    if num_regions < 1:
        raise ValueError("need at least one region")
    return place_d3(config, scheme, num_regions * config.nodes**2)


def place_regions_d3_lrc(
    config: ClusterConfig, scheme: CodeScheme, num_regions: int
) -> PlacementMap:
    if scheme.is_rs:
        raise ValueError("lrc scheme required")
    if num_regions < 1:
        raise ValueError("need at least one region")
    return place_d3(config, scheme, num_regions * config.nodes**2)


def _rack_cap(scheme: CodeScheme) -> int:
    return scheme.m if scheme.is_rs else 1


def _check_feasible(config: ClusterConfig, scheme: CodeScheme) -> None:
    length = scheme.length
    cap = _rack_cap(scheme)
    if length > config.total_nodes:
        raise ConfigError(
            f"stripe of {length} blocks cannot fit on {config.total_nodes} nodes"
        )
    if -(-length // cap) > config.racks:
        raise ConfigError(
            f"stripe of {length} blocks with per-rack cap {cap} needs more "
            f"than {config.racks} racks"
        )
    if cap > config.nodes:
        # a rack's quota must fit on its own distinct nodes
        if length > config.racks * config.nodes:
            raise ConfigError("not enough nodes")


def place_rdd(
    config: ClusterConfig, scheme: CodeScheme, num_stripes: int, seed: int
) -> PlacementMap:
    """Random placement: distinct nodes, resampled until rack caps hold."""
    _check_feasible(config, scheme)
    cap = _rack_cap(scheme)
    rng = random.Random(seed)
    node_ids = range(config.total_nodes)
    addresses = []
    for _ in range(num_stripes):
        while True:
            picks = rng.sample(node_ids, scheme.length)
            per_rack = [0] * config.racks
            ok = True
            for nid in picks:
                rack = nid // config.nodes
                per_rack[rack] += 1
                if per_rack[rack] > cap:
                    ok = False
                    break
            if ok:
                break
        addresses.append(
            [BlockAddress(nid // config.nodes, nid % config.nodes) for nid in picks]
        )
    return PlacementMap(
        config=config, scheme=scheme, placer="rdd", seed=seed, addresses=addresses
    )


_MASK64 = (1 << 64) - 1


def mix64(value: int) -> int:
    """64-bit finalizer used by the hash placer."""
    x = (value + 0x9E3779B97F4A7C15) & _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    x ^= x >> 31
    return x


def hdd_node_id(seed: int, stripe: int, block: int, attempt: int, total: int) -> int:
    """Hash placement address: absorb the inputs in order, then reduce."""
    x = 0
    for v in (seed, stripe, block, attempt):
        x = mix64((x ^ (v & _MASK64)) & _MASK64)
    return x % total


_HDD_MAX_ATTEMPTS = 1 << 16


def place_hdd(
    config: ClusterConfig,
    scheme: CodeScheme,
    num_stripes: int,
    seed: int,
    failed_nodes: tuple[BlockAddress, ...] = (),
) -> PlacementMap:
    """Deterministic pseudo-random placement with reselection on conflict."""
    _check_feasible(config, scheme)
    cap = _rack_cap(scheme)
    total = config.total_nodes
    failed_ids = {addr.rack * config.nodes + addr.node for addr in failed_nodes}
    addresses = []
    for s in range(num_stripes):
        chosen: list[int] = []
        per_rack = [0] * config.racks
        for b in range(scheme.length):
            attempt = 0
            while True:
                if attempt >= _HDD_MAX_ATTEMPTS:
                    raise ConfigError(
                        f"hash placement gave up on stripe {s} block {b}"
                    )
                nid = hdd_node_id(seed, s, b, attempt, total)
                rack = nid // config.nodes
                if nid in chosen or nid in failed_ids or per_rack[rack] >= cap:
                    attempt += 1
                    continue
                break
            chosen.append(nid)
            per_rack[rack] += 1
        addresses.append(
            [BlockAddress(nid // config.nodes, nid % config.nodes) for nid in chosen]
        )
    return PlacementMap(
        config=config, scheme=scheme, placer="hdd", seed=seed, addresses=addresses
    )


def locate_block(pmap: PlacementMap, stripe: int, block: int) -> BlockAddress:
    if not 0 <= stripe < pmap.num_stripes:
        raise IndexError(f"stripe {stripe} out of range 0..{pmap.num_stripes - 1}")
    if not 0 <= block < pmap.scheme.length:
        raise IndexError(f"block {block} out of range 0..{pmap.scheme.length - 1}")
    return pmap.addresses[stripe][block]


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def to_json_dict(pmap: PlacementMap) -> dict:
    doc = {
        "version": MAP_FORMAT_VERSION,
        "config": {
            "r": pmap.config.racks,
            "n": pmap.config.nodes,
            "inner_bw": pmap.config.inner_mbps,
            "cross_bw": pmap.config.cross_mbps,
            "block_size": pmap.config.block_size,
        },
        "scheme": pmap.scheme.spec_str(),
        "provenance": {"placer": pmap.placer, "seed": pmap.seed},
        "stripes": [
            [{"rack": a.rack, "node": a.node} for a in stripe]
            for stripe in pmap.addresses
        ],
    }
    if pmap.failed_node is not None:
        doc["recovery"] = {
            "failed": {"rack": pmap.failed_node.rack, "node": pmap.failed_node.node},
            "relocations": [
                {
                    "stripe": s,
                    "block": b,
                    "label": rel.label,
                    "region": rel.region,
                    "group": rel.group,
                }
                for (s, b), rel in sorted(pmap.relocations.items())
            ],
        }
    return doc


def from_json_dict(doc: dict) -> PlacementMap:
    if doc.get("version") != MAP_FORMAT_VERSION:
        raise ValueError(f"unsupported map version {doc.get('version')!r}")
    cfg = doc["config"]
    config = ClusterConfig(
        racks=cfg["r"],
        nodes=cfg["n"],
        inner_mbps=cfg["inner_bw"],
        cross_mbps=cfg["cross_bw"],
        block_size=cfg["block_size"],
    )
    scheme = parse_scheme(doc["scheme"])
    addresses = [
        [BlockAddress(a["rack"], a["node"]) for a in stripe]
        for stripe in doc["stripes"]
    ]
    pmap = PlacementMap(
        config=config,
        scheme=scheme,
        placer=doc["provenance"]["placer"],
        seed=doc["provenance"]["seed"],
        addresses=addresses,
    )
    recovery = doc.get("recovery")
    if recovery:
        pmap.failed_node = BlockAddress(
            recovery["failed"]["rack"], recovery["failed"]["node"]
        )
        for rel in recovery["relocations"]:
            pmap.relocations[(rel["stripe"], rel["block"])] = Relocation(
                label=rel["label"], region=rel["region"], group=rel["group"]
            )
    return pmap


def save_map(pmap: PlacementMap, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_json_dict(pmap), fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_map(path) -> PlacementMap:
    with open(path, encoding="utf-8") as fh:
        return from_json_dict(json.load(fh))


def node_class_counts(pmap: PlacementMap) -> dict[str, list[list[int]]]:
    """Per-node block counts split by block class."""
    classes = ("data", "parity") if pmap.scheme.is_rs else ("data", "local", "global")
    counts = {
        cls: [[0] * pmap.config.nodes for _ in range(pmap.config.racks)]
        for cls in classes
    }
    for _s, b, addr in pmap.iter_blocks():
        counts[pmap.scheme.block_class(b)][addr.rack][addr.node] += 1
    return counts


def node_counts_csv(pmap: PlacementMap) -> str:
    counts = node_class_counts(pmap)
    lines = ["rack,node,class,count"]
    for cls in counts:
        for rack in range(pmap.config.racks):
            for node in range(pmap.config.nodes):
                lines.append(f"{rack},{node},{cls},{counts[cls][rack][node]}")
    return "\n".join(lines) + "\n"


def clone_map(pmap: PlacementMap) -> PlacementMap:
    return replace(
        pmap,
        addresses=[list(stripe) for stripe in pmap.addresses],
        relocations=dict(pmap.relocations),
    )
