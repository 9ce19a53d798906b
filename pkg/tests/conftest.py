import random

import pytest

from faultfabric.fabric import Fabric, Topology
from faultfabric.packets import Packet, PacketKind, Protocol
from faultfabric.topologies import builtin_topology


def make_fabric(name: str, seed: int = 0) -> Fabric:
    return Fabric(Topology.parse(builtin_topology(name)), seed=seed)


def make_packet(fabric, src_port_id, dst_address, *, t=None, flow_id="flow", payload=b"payload-bytes",
                protocol=Protocol.TCP, kind=PacketKind.DATAGRAM, service_port=None, packet_id=0,
                request_id=None):
    port = fabric.topology.ports[src_port_id]
    return Packet(
        flow_id=flow_id,
        tenant_id=port.tenant_id,
        src_port_id=src_port_id,
        dst_address=dst_address,
        protocol=protocol,
        payload=payload,
        sent_at=fabric.now if t is None else t,
        kind=kind,
        service_port=service_port,
        packet_id=packet_id,
        request_id=request_id,
    )


@pytest.fixture
def two_vm_fabric():
    return make_fabric("minimal_two_vm")


@pytest.fixture
def two_tenant_fabric():
    return make_fabric("two_tenant_pair")


@pytest.fixture
def three_tier_fabric():
    return make_fabric("three_tier_web")


@pytest.fixture
def ims_fabric():
    return make_fabric("ims_dual_segment")


def random_small_topology(seed: int, max_ports: int = 50) -> dict:
    """Seeded generator of valid topology documents for property tests."""
    rng = random.Random(seed)
    doc = {
        "hosts": [
            {"id": "ctl", "role": "controller"},
            {"id": "netnode", "role": "network"},
            {"id": "compute1", "role": "compute"},
            {"id": "compute2", "role": "compute"},
        ],
        "tenants": [],
        "networks": [],
        "subnets": [],
        "routers": [],
        "ports": [],
        "floating_ips": [],
    }
    n_tenants = rng.randint(1, 3)
    for ti in range(n_tenants):
        doc["tenants"].append({"id": f"t{ti}", "name": f"tenant {ti}"})
    port_budget = rng.randint(1, max_ports)
    made_ports = 0
    net_i = 0
    while made_ports < port_budget:
        tenant = rng.choice(doc["tenants"])["id"]
        net_id = f"net{net_i}"
        doc["networks"].append({"id": net_id, "tenant_id": tenant, "name": net_id, "is_external": False})
        n_subnets = rng.randint(0, 2)
        for si in range(n_subnets):
            sub_id = f"{net_id}-sub{si}"
            doc["subnets"].append({"id": sub_id, "network_id": net_id, "cidr": f"10.{net_i}.{si}.0/24"})
            n_ports = rng.randint(0, min(5, port_budget - made_ports))
            for pi in range(n_ports):
                owner = rng.choice(["compute:nova", "compute:nova", "network:router_interface"])
                host = rng.choice(["compute1", "compute2"]) if owner == "compute:nova" else "netnode"
                doc["ports"].append(
                    {
                        "id": f"{sub_id}-p{pi}",
                        "tenant_id": tenant,
                        "device_owner": owner,
                        "host_id": host,
                        "subnet_id": sub_id,
                        "address": f"10.{net_i}.{si}.{10 + pi}",
                    }
                )
                made_ports += 1
        net_i += 1
        if net_i > 12:
            break
    # attach router interface ports to per-tenant routers
    by_tenant = {}
    for port in doc["ports"]:
        if port["device_owner"] == "network:router_interface":
            by_tenant.setdefault(port["tenant_id"], []).append(port["id"])
    for ti, (tenant, pids) in enumerate(sorted(by_tenant.items())):
        doc["routers"].append({"id": f"router{ti}", "tenant_id": tenant, "interface_port_ids": pids})
    # floating ips over a shared external network, attached to some nova ports
    nova_ports = [p for p in doc["ports"] if p["device_owner"] == "compute:nova"]
    if nova_ports and rng.random() < 0.8:
        ext_tenant = doc["tenants"][0]["id"]
        doc["networks"].append({"id": "extnet", "tenant_id": ext_tenant, "name": "public", "is_external": True})
        doc["subnets"].append({"id": "extnet-sub", "network_id": "extnet", "cidr": "198.51.100.0/24"})
        for fi, target in enumerate(rng.sample(nova_ports, min(len(nova_ports), rng.randint(1, 3)))):
            addr = f"198.51.100.{10 + fi}"
            doc["ports"].append(
                {
                    "id": f"fip{fi}-port",
                    "tenant_id": target["tenant_id"],
                    "device_owner": "network:floatingip",
                    "host_id": "netnode",
                    "subnet_id": "extnet-sub",
                    "address": addr,
                }
            )
            doc["floating_ips"].append(
                {"id": f"fip{fi}", "tenant_id": target["tenant_id"], "address": addr,
                 "attached_port_id": target["id"]}
            )
    return doc


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    del exitstatus, config
    rows = []
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            if "test_acceptance" in report.nodeid and getattr(report, "when", "call") == "call":
                name = report.nodeid.split("::")[-1]
                rows.append((name, "PASS" if status == "passed" else "FAIL"))
    if rows:
        terminalreporter.write_sep("-", "acceptance criteria")
        for name, outcome in sorted(rows):
            terminalreporter.write_line(f"[{outcome}] {name}")
