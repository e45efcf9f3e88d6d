"""Command-line front end.

Subcommands build layouts, verify their invariants, simulate failures and
repairs, plan migration, and sweep comparison experiments. Every command is
deterministic given its flags: randomness always flows through an explicit
(or defaulted, but recorded) seed, and outputs carry no timestamps, so
reruns are byte-identical.

Exit codes: 0 success, 1 invariant/verification failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import sys

from .codes import parse_scheme, mean_cross_rack_reads
from .metrics import (
    fault_tolerance_check,
    min_cross_reads_oracle,
    uniformity_report,
)
from .migration import apply_migration, migration_csv, plan_migration
from .placement import (
    BlockAddress,
    ClusterConfig,
    ConfigError,
    PlacementMap,
    place_d3,
    place_hdd,
    place_rdd,
    load_map,
    save_map,
    validate_config,
)
from .recovery import (
    apply_recovery,
    plan_degraded_read,
    plan_node_recovery,
)
from .simnet import (
    BandwidthModel,
    accumulate_traffic,
    degraded_read_latency,
    load_imbalance,
    recovery_throughput,
    recovery_time,
)

_PLACERS = ("d3", "rdd", "hdd")


def _bandwidth(config: ClusterConfig) -> BandwidthModel:
    return BandwidthModel(inner_mbps=config.inner_mbps, cross_mbps=config.cross_mbps)


def _build_map(args) -> PlacementMap:
    config = ClusterConfig(
        racks=args.racks,
        nodes=args.nodes,
        inner_mbps=args.inner_bw,
        cross_mbps=args.cross_bw,
        block_size=int(round(args.block_mb * 1_000_000)),
    )
    scheme = parse_scheme(args.code)
    if args.placer == "d3":
        return place_d3(config, scheme, args.stripes)
    seed = args.seed if args.seed is not None else 0
    if args.placer == "rdd":
        return place_rdd(config, scheme, args.stripes, seed)
    return place_hdd(config, scheme, args.stripes, seed)


def _cmd_layout(args) -> int:
    try:
        pmap = _build_map(args)
    except (ConfigError, ValueError) as exc:
        print(f"layout error: {exc}", file=sys.stderr)
        return 2
    save_map(pmap, args.out)
    print(f"wrote {pmap.num_stripes} stripes to {args.out}")
    return 0


def _verify_map(pmap: PlacementMap) -> list[str]:
    problems: list[str] = []
    if pmap.failed_node is None:
        if pmap.is_d3:
            problems.extend(validate_config(pmap.config, pmap.scheme))
            expected = (
                place_d3(pmap.config, pmap.scheme, pmap.num_stripes)
                if not problems
                else None
            )
        elif pmap.placer == "rdd":
            expected = place_rdd(pmap.config, pmap.scheme, pmap.num_stripes, pmap.seed)
        elif pmap.placer == "hdd":
            expected = place_hdd(pmap.config, pmap.scheme, pmap.num_stripes, pmap.seed)
        else:
            expected = None
            problems.append(f"unknown placer {pmap.placer!r}")
        if expected is not None and expected.addresses != pmap.addresses:
            problems.append("addresses do not reproduce from the recorded provenance")
    report = fault_tolerance_check(pmap)
    problems.extend(report.violations)
    if pmap.is_d3 and pmap.failed_node is None and pmap.num_stripes % pmap.stripes_per_cycle == 0:
        uni = uniformity_report(pmap)
        if not uni.passed:
            problems.append("whole-cycle map is not uniform per block class")
    return problems


def _load_map_or_exit(path) -> PlacementMap | None:
    try:
        return load_map(path)
    except (OSError, ValueError, KeyError) as exc:
        print(f"cannot read map {path}: {exc}", file=sys.stderr)
        return None


def _cmd_verify(args) -> int:
    pmap = _load_map_or_exit(args.map)
    if pmap is None:
        return 2
    problems = _verify_map(pmap)
    if problems:
        for p in problems:
            print(f"FAIL: {p}", file=sys.stderr)
        return 1
    print("ok")
    return 0


def _write_metric_csv(path: str, rows: list[tuple[str, str]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        writer.writerows(rows)


def _cmd_recover(args) -> int:
    pmap = _load_map_or_exit(args.map)
    if pmap is None:
        return 2
    try:
        failed = BlockAddress.parse(args.fail)
        plan = plan_node_recovery(pmap, failed, seed=args.seed)
    except ValueError as exc:
        print(f"recover error: {exc}", file=sys.stderr)
        return 2
    traffic = accumulate_traffic(plan)
    seconds = recovery_time(traffic, _bandwidth(pmap.config))
    failed_bytes = len(plan.stripes) * pmap.config.block_size
    rows = [
        ("cross_rack_bytes", str(traffic.cross_bytes)),
        ("lambda", f"{load_imbalance(traffic):.6f}"),
        ("recovery_time_s", f"{seconds:.6f}"),
        ("throughput_MBps", f"{recovery_throughput(failed_bytes, seconds) / 1e6:.6f}"),
    ]
    _write_metric_csv(args.report, rows)
    if args.plan:
        with open(args.plan, "w", encoding="utf-8") as fh:
            json.dump(plan.to_json_dict(), fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")
    if args.apply:
        save_map(apply_recovery(pmap, plan), args.apply)
    print(f"planned {len(plan.stripes)} block repairs; report in {args.report}")
    return 0


def _cmd_degraded_read(args) -> int:
    pmap = _load_map_or_exit(args.map)
    if pmap is None:
        return 2
    try:
        client = BlockAddress.parse(args.client)
        plan = plan_degraded_read(pmap, args.stripe, args.block, client, seed=args.seed)
    except (ValueError, IndexError) as exc:
        print(f"degraded-read error: {exc}", file=sys.stderr)
        return 2
    traffic = accumulate_traffic(plan)
    latency = degraded_read_latency(plan, _bandwidth(pmap.config))
    rows = [
        ("cross_rack_bytes", str(traffic.cross_bytes)),
        ("degraded_read_latency_s", f"{latency:.6f}"),
    ]
    _write_metric_csv(args.report, rows)
    print(f"degraded read planned; report in {args.report}")
    return 0


def _cmd_migrate(args) -> int:
    pmap = _load_map_or_exit(args.map)
    if pmap is None:
        return 2
    try:
        relived = BlockAddress.parse(args.relived)
        batches = plan_migration(pmap, relived)
    except ValueError as exc:
        print(f"migrate error: {exc}", file=sys.stderr)
        return 2
    restored = apply_migration(pmap, batches)
    save_map(restored, args.out)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(migration_csv(batches))
    print(f"migrated {sum(b.block_count for b in batches)} blocks in {len(batches)} batches")
    return 0


def _cmd_oracle(args) -> int:
    try:
        scheme = parse_scheme(args.code)
        formula = mean_cross_rack_reads(scheme)
        brute = min_cross_reads_oracle(scheme)
    except ValueError as exc:
        print(f"oracle error: {exc}", file=sys.stderr)
        return 2
    print(f"formula: {float(formula):g} ({formula})")
    print(f"oracle:  {float(brute):g} ({brute})")
    return 0 if formula == brute else 1


def _experiment_cells(cfg: dict):
    keys = ("placers", "codes", "block_mb", "cross_bw", "seeds")
    defaults = {
        "placers": ["d3", "rdd"],
        "block_mb": [16],
        "cross_bw": [100.0],
        "seeds": [1],
    }
    lists = {key: cfg.get(key, defaults.get(key)) for key in keys}
    if lists["codes"] is None:
        raise ValueError("experiment config needs a codes list")
    return itertools.product(
        lists["placers"], lists["codes"], lists["block_mb"], lists["cross_bw"], lists["seeds"]
    )


def run_experiment_cell(
    placer: str,
    code: str,
    racks: int,
    nodes: int,
    stripes: int,
    block_mb: float,
    cross_bw: float,
    inner_bw: float,
    seed: int,
) -> dict:
    """One sweep cell: place, fail a seeded node, recover, measure."""
    config = ClusterConfig(
        racks=racks,
        nodes=nodes,
        inner_mbps=inner_bw,
        cross_mbps=cross_bw,
        block_size=int(round(block_mb * 1_000_000)),
    )
    scheme = parse_scheme(code)
    if placer == "d3":
        pmap = place_d3(config, scheme, stripes)
    elif placer == "rdd":
        pmap = place_rdd(config, scheme, stripes, seed)
    elif placer == "hdd":
        pmap = place_hdd(config, scheme, stripes, seed)
    else:
        raise ValueError(f"unknown placer {placer!r}")
    import random as _random

    pick = _random.Random(seed).randrange(config.total_nodes)
    failed = BlockAddress(pick // nodes, pick % nodes)
    plan = plan_node_recovery(pmap, failed, seed=seed)
    traffic = accumulate_traffic(plan)
    seconds = recovery_time(traffic, _bandwidth(config))
    failed_bytes = len(plan.stripes) * config.block_size
    return {
        "placer": placer,
        "code": code,
        "r": racks,
        "n": nodes,
        "block_mb": block_mb,
        "cross_bw": cross_bw,
        "inner_bw": inner_bw,
        "seed": seed,
        "lambda": load_imbalance(traffic),
        "recovery_time_s": seconds,
        "throughput_MBps": recovery_throughput(failed_bytes, seconds) / 1e6,
    }


_EXPERIMENT_COLUMNS = (
    "placer",
    "code",
    "r",
    "n",
    "block_mb",
    "cross_bw",
    "inner_bw",
    "seed",
    "lambda",
    "recovery_time_s",
    "throughput_MBps",
)


def _cmd_experiment(args) -> int:
    with open(args.config, encoding="utf-8") as fh:
        cfg = json.load(fh)
    try:
        racks = cfg["racks"]
        nodes = cfg["nodes"]
        stripes = cfg["stripes"]
        inner_bw = cfg.get("inner_bw", 1000.0)
        cells = list(_experiment_cells(cfg))
    except (KeyError, ValueError) as exc:
        print(f"experiment config error: {exc}", file=sys.stderr)
        return 2
    rows = []
    for placer, code, block_mb, cross_bw, seed in cells:
        try:
            result = run_experiment_cell(
                placer, code, racks, nodes, stripes, block_mb, cross_bw, inner_bw, seed
            )
        except (ConfigError, ValueError) as exc:
            print(f"experiment cell {placer}/{code}/seed {seed} failed: {exc}", file=sys.stderr)
            return 2
        rows.append(result)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_EXPERIMENT_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    row["placer"],
                    row["code"],
                    row["r"],
                    row["n"],
                    f"{row['block_mb']:g}",
                    f"{row['cross_bw']:g}",
                    f"{row['inner_bw']:g}",
                    row["seed"],
                    f"{row['lambda']:.6f}",
                    f"{row['recovery_time_s']:.6f}",
                    f"{row['throughput_MBps']:.6f}",
                ]
            )
    print(f"wrote {len(rows)} cells to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="d3place",
        description="deterministic block placement and repair simulation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("layout", help="build a placement map")
    p.add_argument("--placer", choices=_PLACERS, required=True)
    p.add_argument("--code", required=True, help="rs:K,M or lrc:K,L,G")
    p.add_argument("--racks", type=int, required=True)
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--stripes", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--inner-bw", type=float, default=1000.0, help="Mb/s per node")
    p.add_argument("--cross-bw", type=float, default=100.0, help="Mb/s per rack port")
    p.add_argument("--block-mb", type=float, default=16.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_layout)

    p = sub.add_parser("verify", help="check a map's invariants")
    p.add_argument("map")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("recover", help="plan and simulate node recovery")
    p.add_argument("--map", required=True)
    p.add_argument("--fail", required=True, help="rRACK:nNODE")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", required=True)
    p.add_argument("--plan", default=None)
    p.add_argument("--apply", default=None, help="write the post-recovery map here")
    p.set_defaults(func=_cmd_recover)

    p = sub.add_parser("degraded-read", help="simulate a client-side rebuild")
    p.add_argument("--map", required=True)
    p.add_argument("--stripe", type=int, required=True)
    p.add_argument("--block", type=int, required=True)
    p.add_argument("--client", required=True, help="rRACK:nNODE")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", required=True)
    p.set_defaults(func=_cmd_degraded_read)

    p = sub.add_parser("migrate", help="restore the canonical layout")
    p.add_argument("--map", required=True)
    p.add_argument("--relived", required=True, help="rRACK:nNODE")
    p.add_argument("--out", required=True)
    p.add_argument("--report", default=None)
    p.set_defaults(func=_cmd_migrate)

    p = sub.add_parser("oracle", help="closed form vs brute-force repair minimum")
    p.add_argument("--code", required=True, help="rs:K,M")
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("experiment", help="sweep placers x codes x settings")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
