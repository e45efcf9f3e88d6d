import pytest

from d3place.codes import parse_scheme
from d3place.placement import (
    BlockAddress,
    ClusterConfig,
    place_d3,
    place_rdd,
    place_regions_d3_rs,
)
from d3place.recovery import (
    KIND_CROSS_SEND,
    RecoveryPlan,
    RecoveryStep,
    plan_degraded_read,
    plan_node_recovery,
)
from d3place.simnet import (
    BandwidthModel,
    accumulate_traffic,
    degraded_read_latency,
    load_imbalance,
    recovery_throughput,
    recovery_time,
)

BW = BandwidthModel(inner_mbps=1000.0, cross_mbps=100.0)


def single_send_plan(nbytes=16_000_000):
    config = ClusterConfig(racks=4, nodes=2, block_size=nbytes)
    step = RecoveryStep(
        KIND_CROSS_SEND,
        stripe=0,
        src=BlockAddress(0, 0),
        dst=BlockAddress(1, 0),
        nbytes=nbytes,
    )
    from d3place.recovery import StripeRecovery

    sr = StripeRecovery(
        stripe=0,
        failed_block=0,
        sources=(1,),
        aggregates=(),
        local_blocks=(),
        target=BlockAddress(1, 0),
        relabel="baseline",
        region=0,
        group=-1,
        cross_reads=1,
        steps=(step,),
    )
    return RecoveryPlan(
        config=config,
        scheme=parse_scheme("rs:2,1"),
        placer="rdd",
        kind="node_recovery",
        failed=BlockAddress(2, 0),
        stripes=[sr],
    )


def test_single_block_port_tally():
    traffic = accumulate_traffic(single_send_plan())
    assert traffic.up[0] == 16_000_000
    assert traffic.down[1] == 16_000_000
    assert traffic.cross_bytes == 16_000_000
    assert sum(traffic.up) == sum(traffic.down)


def test_single_block_transfer_time():
    traffic = accumulate_traffic(single_send_plan())
    assert recovery_time(traffic, BW) == pytest.approx(1.28)


def test_doubling_cross_bandwidth_halves_time():
    traffic = accumulate_traffic(single_send_plan())
    fast = BandwidthModel(inner_mbps=1000.0, cross_mbps=200.0)
    assert recovery_time(traffic, fast) == pytest.approx(
        recovery_time(traffic, BW) / 2
    )


def test_adding_cross_send_never_speeds_up():
    plan = single_send_plan()
    base = recovery_time(accumulate_traffic(plan), BW)
    extra = RecoveryStep(
        KIND_CROSS_SEND,
        stripe=0,
        src=BlockAddress(3, 0),
        dst=BlockAddress(1, 1),
        nbytes=16_000_000,
    )
    sr = plan.stripes[0]
    from dataclasses import replace

    plan.stripes[0] = replace(sr, steps=sr.steps + (extra,))
    assert recovery_time(accumulate_traffic(plan), BW) >= base


def test_empty_plan_traffic_is_zero():
    config = ClusterConfig(racks=5, nodes=3)
    pmap = place_regions_d3_rs(config, parse_scheme("rs:3,2"), 1)
    plan = plan_node_recovery(pmap, BlockAddress(4, 0))
    traffic = accumulate_traffic(plan)
    assert traffic.cross_bytes == 0
    assert recovery_time(traffic, BW) == 0.0
    with pytest.raises(ValueError):
        load_imbalance(traffic)
    with pytest.raises(ValueError):
        recovery_throughput(0, 0.0)


def test_lambda_zero_on_equal_loads():
    pmap = place_regions_d3_rs(
        ClusterConfig(racks=5, nodes=3), parse_scheme("rs:3,2"), 20
    )
    plan = plan_node_recovery(pmap, BlockAddress(1, 2))
    traffic = accumulate_traffic(plan)
    assert load_imbalance(traffic) == 0.0
    # every surviving port carries the same bytes in both directions
    loads = traffic.surviving_port_loads()
    assert len(set(loads)) == 1


def test_lambda_excludes_failed_rack_port():
    pmap = place_rdd(
        ClusterConfig(racks=8, nodes=3), parse_scheme("rs:2,1"), 500, seed=4
    )
    failed = BlockAddress(0, 0)
    plan = plan_node_recovery(pmap, failed, seed=4)
    traffic = accumulate_traffic(plan)
    assert traffic.excluded_rack == 0
    assert len(traffic.surviving_port_loads()) == 14
    assert load_imbalance(traffic) > 0.0


def test_conservation_on_real_plans():
    pmap = place_rdd(
        ClusterConfig(racks=8, nodes=3), parse_scheme("rs:6,3"), 200, seed=6
    )
    plan = plan_node_recovery(pmap, BlockAddress(5, 1), seed=6)
    traffic = accumulate_traffic(plan)
    assert sum(traffic.up) == sum(traffic.down)


def test_degraded_read_latency_stages():
    config = ClusterConfig(racks=8, nodes=3, block_size=16_000_000)
    pmap = place_d3(config, parse_scheme("rs:6,3"), 9)
    used = {a.rack for a in pmap.addresses[0]}
    client_rack = next(r for r in range(8) if r not in used)
    plan = plan_degraded_read(pmap, 0, 0, BlockAddress(client_rack, 0))
    latency = degraded_read_latency(plan, BW)
    # stage 1: two inner reads in each of two racks in parallel (2 blocks each);
    # stage 2: two folded blocks serialized on the client downlink
    stage1 = 2 * 16_000_000 / BW.inner_bytes_per_s
    stage2 = 2 * 16_000_000 / BW.cross_bytes_per_s
    assert latency == pytest.approx(stage1 + stage2)


def test_degraded_read_zero_inner_for_2_1():
    config = ClusterConfig(racks=8, nodes=3, block_size=16_000_000)
    pmap = place_d3(config, parse_scheme("rs:2,1"), 9)
    used = {a.rack for a in pmap.addresses[0]}
    client_rack = next(r for r in range(8) if r not in used)
    plan = plan_degraded_read(pmap, 0, 0, BlockAddress(client_rack, 0))
    latency = degraded_read_latency(plan, BW)
    assert latency == pytest.approx(2 * 16_000_000 / BW.cross_bytes_per_s)


def test_degraded_read_d3_faster_than_baseline_6_3():
    config = ClusterConfig(racks=8, nodes=3, block_size=16_000_000)
    scheme = parse_scheme("rs:6,3")
    d3_map = place_d3(config, scheme, 9)
    rdd_map = place_rdd(config, scheme, 9, seed=21)
    client = BlockAddress(7, 1)
    assert 7 not in {a.rack for a in d3_map.addresses[0]}
    d3_latency = degraded_read_latency(plan_degraded_read(d3_map, 0, 0, client), BW)
    rdd_latency = degraded_read_latency(
        plan_degraded_read(rdd_map, 0, 0, client, seed=22), BW
    )
    assert d3_latency < rdd_latency  # 2 folded blocks vs 6 whole blocks


def test_nothing_to_stage_means_zero_latency():
    plan = RecoveryPlan(
        config=ClusterConfig(racks=4, nodes=2),
        scheme=parse_scheme("rs:2,1"),
        placer="d3",
        kind="degraded_read",
        failed=None,
        stripes=[],
        client=BlockAddress(0, 0),
    )
    assert degraded_read_latency(plan, BW) == 0.0


def test_latency_model_rejects_recovery_plans():
    pmap = place_regions_d3_rs(
        ClusterConfig(racks=5, nodes=3), parse_scheme("rs:3,2"), 1
    )
    plan = plan_node_recovery(pmap, BlockAddress(0, 0))
    with pytest.raises(ValueError):
        degraded_read_latency(plan, BW)


def test_traffic_csv_header():
    traffic = accumulate_traffic(single_send_plan())
    lines = traffic.to_csv().strip().splitlines()
    assert lines[0] == "port_or_node,direction,bytes"
    assert "rack0,up,16000000" in lines
