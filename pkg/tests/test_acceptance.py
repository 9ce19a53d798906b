"""Acceptance suite: one test per release criterion, at the stated
tolerances. Seeds come from FAULTFABRIC_SEED so the whole suite is
reproducible end to end."""

import math
import os
import time

import pytest

from faultfabric.errors import NotFound
from faultfabric.fabric import Topology
from faultfabric.faults import (
    DeliverAndDuplicate,
    DeliverCorrupted,
    Drop,
    FaultSpec,
    ItemInjectionState,
    apply_fault,
)
from faultfabric.mapper import build_item_map, item_id_for_port, resolve_items
from faultfabric.orchestrator import Orchestrator
from faultfabric.packets import FlowEventKind, Packet, Protocol
from faultfabric.workload import compute_metrics, config_from_dict, deploy_workload

from conftest import make_fabric, random_small_topology

SEED = int(os.environ.get("FAULTFABRIC_SEED", "1337"))


def spec_dict(fault_type="loss", pattern="persistent", intensity=1.0, pre=0.0, inject=10_000.0,
              post=0.0, seed=SEED, **extra):
    spec = {
        "fault_type": fault_type,
        "pattern": pattern,
        "intensity": intensity,
        "timing": {"pre_ms": pre, "inject_ms": inject, "post_ms": post},
        "seed": seed,
    }
    spec.update(extra)
    return spec


def bandwidth_cfg(client, server, pkts_per_s=100, duration_ms=60_000):
    return config_from_dict({
        "kind": "bandwidth",
        "protocol": "udp",
        "pkts_per_s": pkts_per_s,
        "payload_bytes": 128,
        "duration_ms": duration_ms,
        "attach": {"client_port_ids": [client], "server_id": server},
    })


def reqresp_cfg(client, server, users=8, rpm=480, duration_ms=60_000, timeout_ms=2_000,
                response_bytes=5_000):
    return config_from_dict({
        "kind": "request_response",
        "concurrent_users": users,
        "reqs_per_min": rpm,
        "think_time_ms": 0,
        "response_payload_bytes": response_bytes,
        "timeout_ms": timeout_ms,
        "duration_ms": duration_ms,
        "attach": {"client_port_ids": [client], "server_id": server},
    })


def synthetic_packet(i, t, payload=b"0123456789abcdef"):
    return Packet(
        flow_id="synth", tenant_id="t", src_port_id="p", dst_address="10.0.0.1",
        protocol=Protocol.TCP, payload=payload, sent_at=t, service_port=80, packet_id=i,
    )


def test_tenant_isolation():
    """Persistent loss on tenant A's subnet: A delivers nothing during the
    window, B's run is byte-equal to its solo run, all under 5 s wall."""
    t_start = time.monotonic()

    def run(with_a: bool):
        fabric = make_fabric("two_tenant_pair", seed=SEED)
        orch = Orchestrator(fabric)
        handles = {}
        if with_a:
            spec = FaultSpec.from_dict(spec_dict(pre=10_000.0, inject=30_000.0, post=0.0))
            orch.inject_resource("tenant_a", "subnet", "a-sub", spec)
            handles["a"] = deploy_workload(fabric, "tenant_a", bandwidth_cfg("a1-port", "a2-port"), "iso-a")
            handles["a"].start(0.0)
        handles["b"] = deploy_workload(fabric, "tenant_b", bandwidth_cfg("b1-port", "b2-port"), "iso-b")
        handles["b"].start(0.0)
        fabric.step(61_000.0)
        return handles

    both = run(with_a=True)
    solo = run(with_a=False)

    # exhaustive trace audit: every altered/dropped packet is tenant A's
    audit = both["a"].fabric.audit_entries()
    assert audit
    assert all(entry.tenant_id == "tenant_a" for entry in audit)

    a_events = both["a"].events
    delivered_in_window = [
        e for e in a_events if e.kind == FlowEventKind.DELIVERED and 10_000.0 <= e.t < 40_000.0
    ]
    assert delivered_in_window == []
    dropped = [e for e in a_events if e.kind == FlowEventKind.DROPPED]
    assert len(dropped) == 3000  # 100 pkts/s x 30 s of total loss

    def latencies(handle):
        return {
            e.packet_id: e.t - e.sent_at
            for e in handle.events
            if e.kind == FlowEventKind.DELIVERED
        }

    lat_both = latencies(both["b"])
    lat_solo = latencies(solo["b"])
    assert len(lat_both) == 6000  # B delivers 100%
    assert lat_both == lat_solo  # exact equality, per-packet
    assert time.monotonic() - t_start < 5.0


def test_statistical_intensity():
    """Random pattern at 0.25/0.50/0.75: affected fraction inside the
    binomial 3-sigma band, for loss, corruption, and duplication."""
    n = 10_000
    outcome_types = {"loss": Drop, "corruption": DeliverCorrupted, "duplication": DeliverAndDuplicate}
    for fault_type, affected_type in outcome_types.items():
        for intensity in (0.25, 0.50, 0.75):
            spec = FaultSpec.from_dict(
                spec_dict(fault_type=fault_type, pattern="random", intensity=intensity, inject=1e9,
                          seed=SEED + int(intensity * 100))
            )
            state = ItemInjectionState(spec=spec, started_at=0.0, item_id="acc-item")
            affected = sum(
                isinstance(apply_fault(state, synthetic_packet(i, float(i)), float(i)), affected_type)
                for i in range(n)
            )
            band = 3 * math.sqrt(intensity * (1 - intensity) / n)
            assert abs(affected / n - intensity) <= band, (fault_type, intensity, affected / n)


def test_delay_exactness_and_ordering():
    """Persistent delay adds exactly the configured amount per packet;
    response times are strictly ordered across 500/1000/1500 ms."""
    # exactness: one injected item on the path, zero jitter
    for amount in (500.0, 1000.0, 1500.0):
        fabric = make_fabric("two_tenant_pair", seed=SEED)
        orch = Orchestrator(fabric)
        spec = FaultSpec.from_dict(
            spec_dict(fault_type="delay", amount_ms=amount, jitter_ms=0.0, inject=30_000.0)
        )
        orch.inject_resource("tenant_a", "port", "a2-port", spec)
        wl = deploy_workload(fabric, "tenant_a", bandwidth_cfg("a1-port", "a2-port", duration_ms=20_000), "dly")
        wl.start(0.0)
        fabric.step(35_000.0)
        delivered = [e for e in wl.events if e.kind == FlowEventKind.DELIVERED]
        assert len(delivered) == 2000
        for ev in delivered:
            # 2 hops at 0.5 ms base plus exactly the configured delay
            assert ev.t - ev.sent_at == pytest.approx(1.0 + amount)

    # ordering on the data path, request/response
    means = []
    for amount in (500.0, 1000.0, 1500.0):
        fabric = make_fabric("three_tier_web", seed=SEED)
        orch = Orchestrator(fabric)
        spec = FaultSpec.from_dict(
            spec_dict(fault_type="delay", amount_ms=amount, jitter_ms=0.0, inject=30_000.0)
        )
        orch.inject_resource("webapp", "subnet", "data-sub", spec)
        wl = deploy_workload(
            fabric, "webapp",
            reqresp_cfg("client-port", "db-port", users=4, rpm=240, duration_ms=20_000, timeout_ms=10_000),
            "dlyrr",
        )
        wl.start(0.0)
        fabric.step(40_000.0)
        metrics = compute_metrics(wl.events, (0.0, 20_000.0))
        assert metrics.delivered > 0
        means.append(metrics.response_mean_ms)
    assert means[0] < means[1] < means[2]


def test_pattern_semantics_bursty():
    """Bursty (1000 ms period, duty 0.25): every affected packet falls in an
    on-phase; everything sent in off-phases arrives untouched."""
    fabric = make_fabric("two_tenant_pair", seed=SEED)
    orch = Orchestrator(fabric)
    spec = FaultSpec.from_dict(
        spec_dict(pattern="bursty", inject=20_000.0, period_ms=1000.0, duty_fraction=0.25)
    )
    handle = orch.inject_resource("tenant_a", "subnet", "a-sub", spec)
    wl = deploy_workload(fabric, "tenant_a", bandwidth_cfg("a1-port", "a2-port", duration_ms=20_000), "bst")
    wl.start(0.0)
    fabric.step(25_000.0)
    start = handle.inject_start
    audit = fabric.audit_entries()
    assert audit
    for entry in audit:
        assert (entry.t - start) % 1000.0 < 250.0
    # brute-force audit of the flow trace: off-phase packets all delivered
    for ev in wl.events:
        if ev.kind == FlowEventKind.SENT and (ev.sent_at - start) % 1000.0 >= 250.0:
            outcomes = [
                e for e in wl.events
                if e.packet_id == ev.packet_id and e.kind != FlowEventKind.SENT and not e.is_duplicate
            ]
            assert [o.kind for o in outcomes] == [FlowEventKind.DELIVERED]


def test_pattern_semantics_degradation():
    """Degradation ramps up: per-decile affected fraction non-decreasing
    (100k packets), final decile matches intensity within 3 sigma (1k/decile)."""
    intensity = 0.25
    inject_ms = 40_000.0

    def decile_fractions(n):
        spec = FaultSpec.from_dict(
            spec_dict(pattern="degradation", intensity=intensity, inject=inject_ms, seed=SEED + 7)
        )
        state = ItemInjectionState(spec=spec, started_at=0.0, item_id="deg-item")
        counts = [0] * 10
        totals = [0] * 10
        dt = inject_ms / n
        for i in range(n):
            t = i * dt
            decile = min(9, int(t / (inject_ms / 10)))
            totals[decile] += 1
            if isinstance(apply_fault(state, synthetic_packet(i, t), t), Drop):
                counts[decile] += 1
        return [c / t for c, t in zip(counts, totals)], totals

    fractions, _ = decile_fractions(100_000)
    for lo, hi in zip(fractions, fractions[1:]):
        assert lo <= hi

    fractions_small, totals_small = decile_fractions(10_000)
    n_final = totals_small[9]
    band = 3 * math.sqrt(intensity * (1 - intensity) / n_final)
    assert abs(fractions_small[9] - intensity) <= band


def test_phase_honesty():
    """pre=10 s, inject=20 s, post=10 s: every non-pass-through ruling and
    every failed transaction lands inside [10 s, 30 s)."""
    fabric = make_fabric("two_tenant_pair", seed=SEED)
    orch = Orchestrator(fabric)
    spec = FaultSpec.from_dict(spec_dict(pre=10_000.0, inject=20_000.0, post=10_000.0))
    handle = orch.inject_resource("tenant_a", "subnet", "a-sub", spec)
    wl = deploy_workload(fabric, "tenant_a", bandwidth_cfg("a1-port", "a2-port", duration_ms=40_000), "ph")
    wl.start(0.0)
    fabric.step(45_000.0)
    assert handle.phase(fabric.now) == "completed"
    audit = fabric.audit_entries()
    assert audit
    for entry in audit:
        assert 10_000.0 <= entry.t < 30_000.0
    for ev in wl.events:
        if ev.kind == FlowEventKind.DROPPED:
            assert 10_000.0 <= ev.t < 30_000.0


@pytest.mark.parametrize(
    "fixture,kind,rid,client,server",
    [
        ("three_tier_web", "network", "data_net", "client-port", "db-port"),
        ("three_tier_web", "router", "router_data", "client-port", "db-port"),
        ("three_tier_web", "port", "db-port", "client-port", "db-port"),
        ("minimal_two_vm", "floating_ip", "fip1", "vm1-port", "fip1"),
    ],
)
def test_config_fault_round_trip(fixture, kind, rid, client, server):
    """Delete+restore is byte-identical and errors happen strictly inside
    the outage window."""
    fabric = make_fabric(fixture, seed=SEED)
    orch = Orchestrator(fabric)
    tenant = "webapp" if fixture == "three_tier_web" else "demo"
    before = fabric.topology.serialize_json()
    orch.inject_config_fault(tenant, kind, rid, outage_ms=10_000.0, pre_ms=10_000.0, post_ms=10_000.0)
    wl = deploy_workload(
        fabric, tenant,
        reqresp_cfg(client, server, users=4, rpm=480, duration_ms=30_000, timeout_ms=2_000),
        "cf",
    )
    wl.start(0.0)
    fabric.step(45_000.0)
    assert fabric.topology.serialize_json() == before
    metrics = compute_metrics(wl.events, (0.0, 30_000.0))
    assert metrics.errors > 0
    for row in metrics.series:
        if 10 <= row.t_s < 20:
            assert row.error_rate > 0.0, f"second {row.t_s} should sit inside the outage"
        else:
            assert row.error_rate == 0.0, f"second {row.t_s} should be clean"


def segment_fault_run(spec=None):
    """Request/response load against the dual-segment balancer topology,
    optionally with a fault injected on segment B's subnet at t=10 s."""
    fabric = make_fabric("three_tier_web", seed=SEED)
    orch = Orchestrator(fabric)
    if spec is not None:
        orch.inject_resource("webapp", "subnet", "seg-b-sub", FaultSpec.from_dict(spec))
    wl = deploy_workload(fabric, "webapp", reqresp_cfg("client-port", "lb1"), "seg")
    wl.start(0.0)
    fabric.step(65_000.0)
    return fabric, wl


def per_second_ok(metrics):
    return [row.throughput for row in metrics.series]


def test_failover_reproduction():
    """Persistent loss on segment B: the health monitor isolates B within
    20 s of injection start, errors only come from requests sent before
    isolation, and throughput recovers to at least 90% of baseline."""
    _, wl_base = segment_fault_run(None)
    base_metrics = compute_metrics(wl_base.events, (0.0, 60_000.0))
    base_rate = sum(per_second_ok(base_metrics)[26:50]) / 24.0

    fabric, wl = segment_fault_run(spec_dict(pre=10_000.0, inject=40_000.0, post=10_000.0))
    runtime = fabric.balancer_runtimes["lb1"]
    state = runtime.backends["app-b-port"]
    isolated_at = state.first_isolated_at()
    assert isolated_at is not None
    assert isolated_at - 10_000.0 <= 20_000.0

    metrics = compute_metrics(wl.events, (0.0, 60_000.0))
    rates = per_second_ok(metrics)
    dip_rate = sum(rates[11:25]) / 14.0
    recovered_rate = sum(rates[26:50]) / 24.0
    assert metrics.errors > 0
    assert dip_rate < 0.8 * base_rate, "throughput should dip while B is still in rotation"
    assert recovered_rate >= 0.9 * base_rate, "throughput should recover after isolation"

    errored = [
        ev for ev in wl.events
        if ev.kind in (FlowEventKind.TIMED_OUT, FlowEventKind.DROPPED) and not ev.is_duplicate
    ]
    assert errored
    for ev in errored:
        assert ev.sent_at < isolated_at, "errors only before the health monitor isolates B"


def test_gray_failure_reproduction():
    """25% random loss on segment B degrades throughput more than an
    equal-duration persistent loss, because it never trips the monitor."""
    fabric_p, wl_p = segment_fault_run(spec_dict(pre=10_000.0, inject=40_000.0, post=10_000.0))
    fabric_g, wl_g = segment_fault_run(
        spec_dict(pattern="random", intensity=0.25, pre=10_000.0, inject=40_000.0, post=10_000.0)
    )
    assert fabric_p.balancer_runtimes["lb1"].backends["app-b-port"].first_isolated_at() is not None
    assert fabric_g.balancer_runtimes["lb1"].backends["app-b-port"].first_isolated_at() is None, (
        "gray failure must stay under the health monitor's radar"
    )
    window = (10_000.0, 60_000.0)
    persistent = compute_metrics(wl_p.events, window)
    gray = compute_metrics(wl_g.events, window)
    assert gray.errors > 0
    assert gray.throughput < persistent.throughput


def test_determinism_byte_identical_bundles(tmp_path):
    """The same plan, seed, and topology produce byte-identical report
    bundles on fresh services."""
    plan = {
        "tenant_id": "webapp",
        "baseline": True,
        "cases": [
            {
                "target": {"kind": "subnet", "id": "seg-b-sub"},
                "spec": spec_dict(pre=5_000.0, inject=10_000.0, post=5_000.0),
                "workload": reqresp_cfg("client-port", "lb1", duration_ms=20_000).to_dict(),
            },
            {
                "config_fault": {"kind": "router", "id": "router_b", "outage_ms": 5_000,
                                 "pre_ms": 2_000, "post_ms": 2_000},
                "workload": bandwidth_cfg("client-port", "app-a-port", duration_ms=9_000).to_dict(),
            },
        ],
    }

    def run(tag):
        fabric = make_fabric("three_tier_web", seed=SEED)
        orch = Orchestrator(fabric)
        cid = orch.start_tests("webapp", plan)
        orch.run_until_complete([cid])
        out = tmp_path / tag
        orch.save_logs(cid, out_dir=str(out))
        return {name: (out / name).read_bytes() for name in ("report.json", "series.csv", "events.log")}

    first, second = run("one"), run("two")
    assert first == second
    assert first["report.json"]


def test_mapping_oracle():
    """resolve_items equals a from-scratch port scan on randomized fabrics:
    1000 queries, zero mismatches."""
    import random as random_mod

    rng = random_mod.Random(SEED)
    queries_done = 0
    mismatches = 0
    while queries_done < 1000:
        topo = Topology.parse(random_small_topology(rng.randrange(1 << 30), max_ports=50))
        imap = build_item_map(topo)
        candidates = sorted(topo.resource_ids())
        if not candidates:
            continue
        for _ in range(min(50, len(candidates) * 4)):
            kind, rid = candidates[rng.randrange(len(candidates))]
            got = [i.id for i in resolve_items(imap, kind, rid)]
            expected = brute_force_items(topo, kind, rid)
            if got != expected:
                mismatches += 1
            queries_done += 1
            if queries_done >= 1000:
                break
    assert mismatches == 0


def brute_force_items(topo, kind, rid):
    """First-principles recomputation: scan ports by owner and containment."""
    ports_by_seq = sorted(topo.ports.values(), key=lambda p: p.seq)
    if kind == "port":
        return [item_id_for_port(rid)]
    if kind == "subnet":
        return [item_id_for_port(p.id) for p in ports_by_seq if p.subnet_id == rid]
    if kind == "network":
        out = []
        for subnet in sorted(topo.subnets.values(), key=lambda s: s.seq):
            if subnet.network_id == rid:
                out.extend(item_id_for_port(p.id) for p in ports_by_seq if p.subnet_id == subnet.id)
        return out
    if kind == "router":
        router = topo.routers[rid]
        members = set(router.interface_port_ids)
        if router.gateway_port_id:
            members.add(router.gateway_port_id)
        return [item_id_for_port(p.id) for p in ports_by_seq if p.id in members]
    if kind == "floating_ip":
        fip = topo.floating_ips[rid]
        return [
            item_id_for_port(p.id)
            for p in ports_by_seq
            if p.device_owner.value == "network:floatingip" and p.address == fip.address
        ]
    raise NotFound(kind)
