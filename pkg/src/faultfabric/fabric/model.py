"""Virtual-resource model: hosts, tenants, networks, subnets, routers, ports,
floating IPs, balancers; topology document parsing and validation; and the
snapshot/delete/restore machinery for configuration faults.

The document is JSON with top-level arrays ``hosts``, ``tenants``,
``networks``, ``subnets``, ``routers``, ``ports``, ``floating_ips``,
``balancers``. Every record keeps an internal creation sequence number so
closures, aggregate item lists, and serialization are reproducible; restore
reinstates the original sequence numbers, which is what makes delete+restore
round trips byte-identical.
"""

import ipaddress
import json
from dataclasses import dataclass, field
from enum import Enum

from ..errors import Conflict, NotFound, ParseError, StaleSnapshot, ValidationError


class HostRole(str, Enum):
    CONTROLLER = "controller"
    NETWORK = "network"
    COMPUTE = "compute"


class DeviceOwner(str, Enum):
    COMPUTE_NOVA = "compute:nova"
    ROUTER_INTERFACE = "network:router_interface"
    ROUTER_GATEWAY = "network:router_gateway"
    FLOATING_IP = "network:floatingip"


RESOURCE_KINDS = ("network", "subnet", "router", "port", "floating_ip")


@dataclass
class Host:
    id: str
    role: HostRole
    link_latency_ms: float = 0.5


@dataclass
class Tenant:
    id: str
    name: str
    seq: int = 0


@dataclass
class Network:
    id: str
    tenant_id: str
    name: str
    is_external: bool = False
    seq: int = 0


@dataclass
class Subnet:
    id: str
    network_id: str
    cidr: str
    seq: int = 0


@dataclass
class Port:
    id: str
    tenant_id: str
    device_owner: DeviceOwner
    host_id: str
    subnet_id: str
    address: str
    seq: int = 0


@dataclass
class Router:
    id: str
    tenant_id: str
    interface_port_ids: list[str] = field(default_factory=list)
    gateway_port_id: str | None = None
    seq: int = 0


@dataclass
class FloatingIP:
    id: str
    tenant_id: str
    address: str
    attached_port_id: str
    seq: int = 0


@dataclass
class HealthConfig:
    period_ms: float = 5000.0
    timeout_ms: float = 5000.0
    max_retries: int = 3
    attempt_interval_ms: float = 1000.0


@dataclass
class Balancer:
    id: str
    tenant_id: str
    vip_address: str
    vip_subnet_id: str
    backend_port_ids: list[str] = field(default_factory=list)
    algorithm: str = "round_robin"
    health: HealthConfig = field(default_factory=HealthConfig)
    seq: int = 0


@dataclass
class ResourceSnapshot:
    """Closure of one deleted resource, replayable to restore it.

    ``entries`` hold (kind, record dict) in creation order; ``attachments``
    record router interface/gateway links that were detached because the
    port fell inside the closure while its router did not.
    """

    root_kind: str
    root_id: str
    entries: list[tuple[str, dict]]
    attachments: list[dict]
    context: dict
    taken_at: float

    def ids(self) -> set[str]:
        return {rec["id"] for _, rec in self.entries}

    def to_dict(self) -> dict:
        return {
            "root_kind": self.root_kind,
            "root_id": self.root_id,
            "entries": [[kind, rec] for kind, rec in self.entries],
            "attachments": self.attachments,
            "context": self.context,
            "taken_at": self.taken_at,
        }


def _record(obj) -> dict:
    out = {}
    for key, value in vars(obj).items():
        if isinstance(value, Enum):
            value = value.value
        elif isinstance(value, list):
            value = list(value)
        out[key] = value
    return out


def _require(obj: dict, key: str, kind: str):
    if key not in obj:
        raise ParseError(f"{kind} entry missing field {key!r}")
    return obj[key]


class Topology:
    """Mutable resource graph with validation and cascading delete/restore."""

    def __init__(self):
        self.hosts: dict[str, Host] = {}
        self.tenants: dict[str, Tenant] = {}
        self.networks: dict[str, Network] = {}
        self.subnets: dict[str, Subnet] = {}
        self.routers: dict[str, Router] = {}
        self.ports: dict[str, Port] = {}
        self.floating_ips: dict[str, FloatingIP] = {}
        self.balancers: dict[str, Balancer] = {}
        self._seq = 0

    # --- construction ---

    def next_seq(self) -> int:
        self._seq += 1
        return self._seq

    @staticmethod
    def parse(doc: dict) -> "Topology":
        if not isinstance(doc, dict):
            raise ParseError("topology document must be a JSON object")
        topo = Topology()
        try:
            for entry in doc.get("hosts", []):
                host = Host(
                    id=_require(entry, "id", "host"),
                    role=HostRole(_require(entry, "role", "host")),
                    link_latency_ms=float(entry.get("link_latency_ms", 0.5)),
                )
                if host.id in topo.hosts:
                    raise ValidationError(f"duplicate host id {host.id!r}")
                topo.hosts[host.id] = host
            for entry in doc.get("tenants", []):
                tenant = Tenant(id=_require(entry, "id", "tenant"), name=entry.get("name", ""), seq=topo.next_seq())
                if tenant.id in topo.tenants:
                    raise ValidationError(f"duplicate tenant id {tenant.id!r}")
                topo.tenants[tenant.id] = tenant
            for entry in doc.get("networks", []):
                net = Network(
                    id=_require(entry, "id", "network"),
                    tenant_id=_require(entry, "tenant_id", "network"),
                    name=entry.get("name", ""),
                    is_external=bool(entry.get("is_external", False)),
                    seq=topo.next_seq(),
                )
                if net.id in topo.networks:
                    raise ValidationError(f"duplicate network id {net.id!r}")
                topo.networks[net.id] = net
            for entry in doc.get("subnets", []):
                subnet = Subnet(
                    id=_require(entry, "id", "subnet"),
                    network_id=_require(entry, "network_id", "subnet"),
                    cidr=_require(entry, "cidr", "subnet"),
                    seq=topo.next_seq(),
                )
                if subnet.id in topo.subnets:
                    raise ValidationError(f"duplicate subnet id {subnet.id!r}")
                topo.subnets[subnet.id] = subnet
            for entry in doc.get("routers", []):
                router = Router(
                    id=_require(entry, "id", "router"),
                    tenant_id=_require(entry, "tenant_id", "router"),
                    interface_port_ids=list(entry.get("interface_port_ids", [])),
                    gateway_port_id=entry.get("gateway_port_id"),
                    seq=topo.next_seq(),
                )
                if router.id in topo.routers:
                    raise ValidationError(f"duplicate router id {router.id!r}")
                topo.routers[router.id] = router
            for entry in doc.get("ports", []):
                port = Port(
                    id=_require(entry, "id", "port"),
                    tenant_id=_require(entry, "tenant_id", "port"),
                    device_owner=DeviceOwner(_require(entry, "device_owner", "port")),
                    host_id=_require(entry, "host_id", "port"),
                    subnet_id=_require(entry, "subnet_id", "port"),
                    address=_require(entry, "address", "port"),
                    seq=topo.next_seq(),
                )
                if port.id in topo.ports:
                    raise ValidationError(f"duplicate port id {port.id!r}")
                topo.ports[port.id] = port
            for entry in doc.get("floating_ips", []):
                fip = FloatingIP(
                    id=_require(entry, "id", "floating_ip"),
                    tenant_id=_require(entry, "tenant_id", "floating_ip"),
                    address=_require(entry, "address", "floating_ip"),
                    attached_port_id=_require(entry, "attached_port_id", "floating_ip"),
                    seq=topo.next_seq(),
                )
                if fip.id in topo.floating_ips:
                    raise ValidationError(f"duplicate floating ip id {fip.id!r}")
                topo.floating_ips[fip.id] = fip
            for entry in doc.get("balancers", []):
                health = entry.get("health", {})
                balancer = Balancer(
                    id=_require(entry, "id", "balancer"),
                    tenant_id=_require(entry, "tenant_id", "balancer"),
                    vip_address=_require(entry, "vip_address", "balancer"),
                    vip_subnet_id=_require(entry, "vip_subnet_id", "balancer"),
                    backend_port_ids=list(entry.get("backend_port_ids", [])),
                    algorithm=entry.get("algorithm", "round_robin"),
                    health=HealthConfig(
                        period_ms=float(health.get("period_ms", 5000.0)),
                        timeout_ms=float(health.get("timeout_ms", 5000.0)),
                        max_retries=int(health.get("max_retries", 3)),
                        attempt_interval_ms=float(health.get("attempt_interval_ms", 1000.0)),
                    ),
                    seq=topo.next_seq(),
                )
                if balancer.id in topo.balancers:
                    raise ValidationError(f"duplicate balancer id {balancer.id!r}")
                topo.balancers[balancer.id] = balancer
        except ValueError as exc:
            raise ParseError(str(exc)) from exc
        topo.validate()
        return topo

    @staticmethod
    def parse_json(text: str) -> "Topology":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}") from exc
        return Topology.parse(doc)

    # --- validation ---

    def validate(self):
        roles = [h.role for h in self.hosts.values()]
        if roles.count(HostRole.CONTROLLER) != 1:
            raise ValidationError("fabric requires exactly one controller host")
        if roles.count(HostRole.NETWORK) < 1:
            raise ValidationError("fabric requires at least one network host")
        if roles.count(HostRole.COMPUTE) < 1:
            raise ValidationError("fabric requires at least one compute host")

        for net in self.networks.values():
            if net.tenant_id not in self.tenants:
                raise ValidationError(f"network {net.id}: unknown tenant {net.tenant_id!r}")

        nets_seen: dict[str, list[ipaddress.IPv4Network]] = {}
        for subnet in self.subnets.values():
            if subnet.network_id not in self.networks:
                raise ValidationError(f"subnet {subnet.id}: unknown network {subnet.network_id!r}")
            try:
                cidr = ipaddress.ip_network(subnet.cidr)
            except ValueError as exc:
                raise ValidationError(f"subnet {subnet.id}: bad cidr {subnet.cidr!r}: {exc}") from exc
            for other in nets_seen.setdefault(subnet.network_id, []):
                if cidr.overlaps(other):
                    raise ValidationError(f"subnet {subnet.id}: cidr overlaps a sibling subnet")
            nets_seen[subnet.network_id].append(cidr)

        addrs_per_subnet: dict[str, set[str]] = {}
        for port in self.ports.values():
            if port.tenant_id not in self.tenants:
                raise ValidationError(f"port {port.id}: unknown tenant {port.tenant_id!r}")
            host = self.hosts.get(port.host_id)
            if host is None:
                raise ValidationError(f"port {port.id}: unknown host {port.host_id!r}")
            if port.device_owner == DeviceOwner.COMPUTE_NOVA:
                if host.role != HostRole.COMPUTE:
                    raise ValidationError(f"port {port.id}: compute:nova port must live on a compute host")
            elif host.role != HostRole.NETWORK:
                raise ValidationError(f"port {port.id}: {port.device_owner.value} port must live on a network host")
            subnet = self.subnets.get(port.subnet_id)
            if subnet is None:
                raise ValidationError(f"port {port.id}: unknown subnet {port.subnet_id!r}")
            if ipaddress.ip_address(port.address) not in ipaddress.ip_network(subnet.cidr):
                raise ValidationError(f"port {port.id}: address {port.address} outside {subnet.cidr}")
            seen = addrs_per_subnet.setdefault(port.subnet_id, set())
            if port.address in seen:
                raise ValidationError(f"port {port.id}: duplicate address {port.address} in subnet {port.subnet_id}")
            seen.add(port.address)

        attached_ports: set[str] = set()
        for router in self.routers.values():
            if router.tenant_id not in self.tenants:
                raise ValidationError(f"router {router.id}: unknown tenant {router.tenant_id!r}")
            for pid in router.interface_port_ids:
                port = self.ports.get(pid)
                if port is None:
                    raise ValidationError(f"router {router.id}: unknown interface port {pid!r}")
                if port.device_owner != DeviceOwner.ROUTER_INTERFACE:
                    raise ValidationError(f"router {router.id}: port {pid} is not a router_interface port")
                if pid in attached_ports:
                    raise ValidationError(f"port {pid} attached to more than one router")
                attached_ports.add(pid)
            if router.gateway_port_id is not None:
                port = self.ports.get(router.gateway_port_id)
                if port is None:
                    raise ValidationError(f"router {router.id}: unknown gateway port {router.gateway_port_id!r}")
                if port.device_owner != DeviceOwner.ROUTER_GATEWAY:
                    raise ValidationError(f"router {router.id}: port {port.id} is not a router_gateway port")
                if port.id in attached_ports:
                    raise ValidationError(f"port {port.id} attached to more than one router")
                attached_ports.add(port.id)

        fip_addrs: set[str] = set()
        for fip in self.floating_ips.values():
            if fip.tenant_id not in self.tenants:
                raise ValidationError(f"floating ip {fip.id}: unknown tenant {fip.tenant_id!r}")
            if fip.attached_port_id not in self.ports:
                raise ValidationError(f"floating ip {fip.id}: unknown port {fip.attached_port_id!r}")
            if fip.address in fip_addrs:
                raise ValidationError(f"floating ip {fip.id}: duplicate address {fip.address}")
            fip_addrs.add(fip.address)
            if self.floating_ip_port(fip) is None:
                raise ValidationError(f"floating ip {fip.id}: no network:floatingip port with address {fip.address}")

        for balancer in self.balancers.values():
            if balancer.tenant_id not in self.tenants:
                raise ValidationError(f"balancer {balancer.id}: unknown tenant {balancer.tenant_id!r}")
            subnet = self.subnets.get(balancer.vip_subnet_id)
            if subnet is None:
                raise ValidationError(f"balancer {balancer.id}: unknown vip subnet {balancer.vip_subnet_id!r}")
            if ipaddress.ip_address(balancer.vip_address) not in ipaddress.ip_network(subnet.cidr):
                raise ValidationError(f"balancer {balancer.id}: vip address outside subnet cidr")
            if not balancer.backend_port_ids:
                raise ValidationError(f"balancer {balancer.id}: needs at least one backend")
            for pid in balancer.backend_port_ids:
                port = self.ports.get(pid)
                if port is None:
                    raise ValidationError(f"balancer {balancer.id}: unknown backend port {pid!r}")
                if port.device_owner != DeviceOwner.COMPUTE_NOVA:
                    raise ValidationError(f"balancer {balancer.id}: backend {pid} is not a compute:nova port")

    # --- lookups ---

    def floating_ip_port(self, fip: FloatingIP) -> Port | None:
        for port in self.ports.values():
            if port.device_owner == DeviceOwner.FLOATING_IP and port.address == fip.address:
                return port
        return None

    def collection(self, kind: str) -> dict:
        try:
            return {
                "network": self.networks,
                "subnet": self.subnets,
                "router": self.routers,
                "port": self.ports,
                "floating_ip": self.floating_ips,
            }[kind]
        except KeyError:
            raise NotFound(f"unknown resource kind {kind!r}") from None

    def exists(self, kind: str, rid: str) -> bool:
        return rid in self.collection(kind)

    def get(self, kind: str, rid: str):
        coll = self.collection(kind)
        if rid not in coll:
            raise NotFound(f"{kind} {rid!r} not found")
        return coll[rid]

    def ports_of_subnet(self, subnet_id: str) -> list[Port]:
        return sorted((p for p in self.ports.values() if p.subnet_id == subnet_id), key=lambda p: p.seq)

    def subnets_of_network(self, network_id: str) -> list[Subnet]:
        return sorted((s for s in self.subnets.values() if s.network_id == network_id), key=lambda s: s.seq)

    def fips_of_port(self, port_id: str) -> list[FloatingIP]:
        return sorted((f for f in self.floating_ips.values() if f.attached_port_id == port_id), key=lambda f: f.seq)

    def router_of_port(self, port_id: str) -> Router | None:
        for router in self.routers.values():
            if port_id in router.interface_port_ids or router.gateway_port_id == port_id:
                return router
        return None

    def resource_ids(self) -> set[tuple[str, str]]:
        out = set()
        for kind in RESOURCE_KINDS:
            out.update((kind, rid) for rid in self.collection(kind))
        return out

    # --- serialization ---

    def serialize(self) -> dict:
        by_seq = lambda items: sorted(items, key=lambda r: r.seq)
        return {
            "hosts": [
                {"id": h.id, "role": h.role.value, "link_latency_ms": h.link_latency_ms}
                for h in self.hosts.values()
            ],
            "tenants": [{"id": t.id, "name": t.name} for t in by_seq(self.tenants.values())],
            "networks": [
                {"id": n.id, "tenant_id": n.tenant_id, "name": n.name, "is_external": n.is_external}
                for n in by_seq(self.networks.values())
            ],
            "subnets": [
                {"id": s.id, "network_id": s.network_id, "cidr": s.cidr}
                for s in by_seq(self.subnets.values())
            ],
            "routers": [
                {
                    "id": r.id,
                    "tenant_id": r.tenant_id,
                    "interface_port_ids": list(r.interface_port_ids),
                    "gateway_port_id": r.gateway_port_id,
                }
                for r in by_seq(self.routers.values())
            ],
            "ports": [
                {
                    "id": p.id,
                    "tenant_id": p.tenant_id,
                    "device_owner": p.device_owner.value,
                    "host_id": p.host_id,
                    "subnet_id": p.subnet_id,
                    "address": p.address,
                }
                for p in by_seq(self.ports.values())
            ],
            "floating_ips": [
                {"id": f.id, "tenant_id": f.tenant_id, "address": f.address, "attached_port_id": f.attached_port_id}
                for f in by_seq(self.floating_ips.values())
            ],
            "balancers": [
                {
                    "id": b.id,
                    "tenant_id": b.tenant_id,
                    "vip_address": b.vip_address,
                    "vip_subnet_id": b.vip_subnet_id,
                    "backend_port_ids": list(b.backend_port_ids),
                    "algorithm": b.algorithm,
                    "health": {
                        "period_ms": b.health.period_ms,
                        "timeout_ms": b.health.timeout_ms,
                        "max_retries": b.health.max_retries,
                        "attempt_interval_ms": b.health.attempt_interval_ms,
                    },
                }
                for b in by_seq(self.balancers.values())
            ],
        }

    def serialize_json(self) -> str:
        return json.dumps(self.serialize(), indent=2, sort_keys=True) + "\n"

    # --- snapshots, delete, restore ---

    def closure(self, kind: str, rid: str) -> tuple[list[tuple[str, object]], list[dict], dict]:
        """Everything deleted transitively with (kind, rid), in creation
        order, plus router attachments to detach and snapshot context."""
        root = self.get(kind, rid)
        members: list[tuple[str, object]] = []
        attachments: list[dict] = []
        context: dict = {}

        def add_port(port: Port):
            members.append(("port", port))
            router = self.router_of_port(port.id)
            if router is not None:
                if port.id in router.interface_port_ids:
                    attachments.append(
                        {
                            "kind": "router_interface",
                            "router_id": router.id,
                            "port_id": port.id,
                            "index": router.interface_port_ids.index(port.id),
                        }
                    )
                else:
                    attachments.append(
                        {"kind": "router_gateway", "router_id": router.id, "port_id": port.id, "index": 0}
                    )
            for fip in self.fips_of_port(port.id):
                add_fip(fip)

        def add_fip(fip: FloatingIP):
            if any(obj is fip for _, obj in members):
                return
            members.append(("floating_ip", fip))
            fport = self.floating_ip_port(fip)
            if fport is not None and not any(obj is fport for _, obj in members):
                members.append(("port", fport))

        if kind == "network":
            network = root
            members.append(("network", network))
            for subnet in self.subnets_of_network(network.id):
                members.append(("subnet", subnet))
                for port in self.ports_of_subnet(subnet.id):
                    add_port(port)
        elif kind == "subnet":
            subnet = root
            members.append(("subnet", subnet))
            for port in self.ports_of_subnet(subnet.id):
                add_port(port)
        elif kind == "router":
            router = root
            members.append(("router", router))
            for pid in router.interface_port_ids:
                port = self.ports[pid]
                members.append(("port", port))
                for fip in self.fips_of_port(port.id):
                    add_fip(fip)
            if router.gateway_port_id is not None:
                members.append(("port", self.ports[router.gateway_port_id]))
        elif kind == "port":
            port = root
            if port.device_owner != DeviceOwner.COMPUTE_NOVA:
                raise ValidationError(
                    f"port {port.id} is {port.device_owner.value}; only compute:nova ports can be "
                    "deleted directly (infrastructure ports go with their router or network)"
                )
            add_port(port)
            subnet = self.subnets[port.subnet_id]
            context = {
                "subnet_id": subnet.id,
                "network_id": subnet.network_id,
                "floating_ip_ids": [f.id for f in self.fips_of_port(port.id)],
            }
        elif kind == "floating_ip":
            add_fip(root)
        else:
            raise NotFound(f"unknown resource kind {kind!r}")

        members.sort(key=lambda pair: pair[1].seq)
        # drop attachment notes whose router is itself in the closure
        closure_router_ids = {obj.id for k, obj in members if k == "router"}
        attachments = [a for a in attachments if a["router_id"] not in closure_router_ids]
        return members, attachments, context

    def snapshot(self, kind: str, rid: str, taken_at: float = 0.0) -> ResourceSnapshot:
        members, attachments, context = self.closure(kind, rid)
        return ResourceSnapshot(
            root_kind=kind,
            root_id=rid,
            entries=[(k, _record(obj)) for k, obj in members],
            attachments=attachments,
            context=context,
            taken_at=taken_at,
        )

    def delete(self, kind: str, rid: str, taken_at: float = 0.0) -> ResourceSnapshot:
        snap = self.snapshot(kind, rid, taken_at)
        for entry_kind, rec in snap.entries:
            del self.collection(entry_kind)[rec["id"]]
        for att in snap.attachments:
            router = self.routers[att["router_id"]]
            if att["kind"] == "router_interface":
                router.interface_port_ids.remove(att["port_id"])
            else:
                router.gateway_port_id = None
        return snap

    def restore(self, snap: ResourceSnapshot):
        for entry_kind, rec in snap.entries:
            if rec["id"] in self.collection(entry_kind):
                raise Conflict(f"{entry_kind} {rec['id']!r} already exists; cannot restore")
        self._check_snapshot_parents(snap)
        for entry_kind, rec in snap.entries:
            obj = self._revive(entry_kind, rec)
            self.collection(entry_kind)[obj.id] = obj
        for att in snap.attachments:
            router = self.routers.get(att["router_id"])
            if router is None:
                raise StaleSnapshot(f"router {att['router_id']!r} no longer exists")
            if att["kind"] == "router_interface":
                router.interface_port_ids.insert(min(att["index"], len(router.interface_port_ids)), att["port_id"])
            else:
                router.gateway_port_id = att["port_id"]
        self.validate()

    def _check_snapshot_parents(self, snap: ResourceSnapshot):
        closure_ids = snap.ids()

        def present(coll: dict, ref: str) -> bool:
            return ref in coll or ref in closure_ids

        for entry_kind, rec in snap.entries:
            if entry_kind == "network" and rec["tenant_id"] not in self.tenants:
                raise StaleSnapshot(f"tenant {rec['tenant_id']!r} gone")
            if entry_kind == "subnet" and not present(self.networks, rec["network_id"]):
                raise StaleSnapshot(f"network {rec['network_id']!r} gone")
            if entry_kind == "port":
                if not present(self.subnets, rec["subnet_id"]):
                    raise StaleSnapshot(f"subnet {rec['subnet_id']!r} gone")
                if rec["host_id"] not in self.hosts:
                    raise StaleSnapshot(f"host {rec['host_id']!r} gone")
            if entry_kind == "floating_ip" and not present(self.ports, rec["attached_port_id"]):
                raise StaleSnapshot(f"port {rec['attached_port_id']!r} gone")
            if entry_kind == "router":
                for pid in rec["interface_port_ids"]:
                    if not present(self.ports, pid):
                        raise StaleSnapshot(f"port {pid!r} gone")
        for att in snap.attachments:
            if att["router_id"] not in self.routers:
                raise StaleSnapshot(f"router {att['router_id']!r} gone")

    @staticmethod
    def _revive(kind: str, rec: dict):
        rec = dict(rec)
        if kind == "network":
            return Network(**rec)
        if kind == "subnet":
            return Subnet(**rec)
        if kind == "router":
            rec["interface_port_ids"] = list(rec["interface_port_ids"])
            return Router(**rec)
        if kind == "port":
            rec["device_owner"] = DeviceOwner(rec["device_owner"])
            return Port(**rec)
        if kind == "floating_ip":
            return FloatingIP(**rec)
        raise NotFound(f"unknown resource kind {kind!r}")
