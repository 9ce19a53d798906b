"""Resource-to-injection-item mapping and tenant-scoped topology views.

Every port is backed by exactly one injection item hosted where the port's
interface lives; aggregates (router, subnet, network) resolve to ordered
unions of their member ports' items. Item ids derive deterministically from
port ids so a restored resource gets identical items back.
"""

from dataclasses import dataclass
from enum import Enum

from .errors import NotFound, UnknownTenant
from .fabric.model import DeviceOwner, Topology


class ItemKind(str, Enum):
    TAP_DEVICE = "tap"
    ROUTER_INTERNAL_IF = "router_internal_if"
    ROUTER_EXTERNAL_IF = "router_external_if"
    FLOATING_IP_IF = "floating_ip_if"


_OWNER_TO_KIND = {
    DeviceOwner.COMPUTE_NOVA: ItemKind.TAP_DEVICE,
    DeviceOwner.ROUTER_INTERFACE: ItemKind.ROUTER_INTERNAL_IF,
    DeviceOwner.ROUTER_GATEWAY: ItemKind.ROUTER_EXTERNAL_IF,
    DeviceOwner.FLOATING_IP: ItemKind.FLOATING_IP_IF,
}

_LABEL_PREFIX = {
    ItemKind.TAP_DEVICE: "tap",
    ItemKind.ROUTER_INTERNAL_IF: "qr",
    ItemKind.ROUTER_EXTERNAL_IF: "qg",
    ItemKind.FLOATING_IP_IF: "fg",
}


@dataclass(frozen=True)
class InjectionItem:
    id: str
    location: str  # host id
    kind: ItemKind
    port_id: str
    label: str  # display hint only


def item_id_for_port(port_id: str) -> str:
    return f"item-{port_id}"


class ItemMap:
    """The resource id -> ordered injection item mapping."""

    def __init__(self):
        self.items: dict[str, InjectionItem] = {}
        self._by_resource: dict[str, list[str]] = {}
        self._port_to_item: dict[str, str] = {}

    def add_item(self, item: InjectionItem):
        self.items[item.id] = item
        self._port_to_item[item.port_id] = item.id

    def set_resource(self, resource_id: str, item_ids: list[str]):
        self._by_resource[resource_id] = list(item_ids)

    def item_for_port(self, port_id: str) -> InjectionItem | None:
        iid = self._port_to_item.get(port_id)
        return self.items.get(iid) if iid else None

    def get(self, item_id: str) -> InjectionItem | None:
        return self.items.get(item_id)

    def resolve(self, resource_id: str) -> list[InjectionItem]:
        if resource_id not in self._by_resource:
            raise NotFound(f"resource {resource_id!r} not in item map")
        return [self.items[iid] for iid in self._by_resource[resource_id]]

    def resource_ids(self) -> list[str]:
        return list(self._by_resource)


def build_item_map(topology: Topology) -> ItemMap:
    imap = ItemMap()
    ports_in_order = sorted(topology.ports.values(), key=lambda p: p.seq)
    for port in ports_in_order:
        kind = _OWNER_TO_KIND[port.device_owner]
        item = InjectionItem(
            id=item_id_for_port(port.id),
            location=port.host_id,
            kind=kind,
            port_id=port.id,
            label=f"{_LABEL_PREFIX[kind]}-{port.id}",
        )
        imap.add_item(item)
        imap.set_resource(port.id, [item.id])

    for subnet in sorted(topology.subnets.values(), key=lambda s: s.seq):
        imap.set_resource(subnet.id, [item_id_for_port(p.id) for p in topology.ports_of_subnet(subnet.id)])

    for network in sorted(topology.networks.values(), key=lambda n: n.seq):
        ids: list[str] = []
        for subnet in topology.subnets_of_network(network.id):
            ids.extend(item_id_for_port(p.id) for p in topology.ports_of_subnet(subnet.id))
        imap.set_resource(network.id, ids)

    for router in sorted(topology.routers.values(), key=lambda r: r.seq):
        member_ports = [topology.ports[pid] for pid in router.interface_port_ids]
        if router.gateway_port_id is not None:
            member_ports.append(topology.ports[router.gateway_port_id])
        member_ports.sort(key=lambda p: p.seq)
        imap.set_resource(router.id, [item_id_for_port(p.id) for p in member_ports])

    for fip in sorted(topology.floating_ips.values(), key=lambda f: f.seq):
        fport = topology.floating_ip_port(fip)
        imap.set_resource(fip.id, [item_id_for_port(fport.id)] if fport else [])

    return imap


def resolve_items(item_map: ItemMap, resource_kind: str, resource_id: str) -> list[InjectionItem]:
    # kind is accepted for API symmetry; ids are unique across kinds
    del resource_kind
    return item_map.resolve(resource_id)


def get_network_topology(topology: Topology, tenant_id: str) -> dict:
    """Tenant view of the virtual network: topology-document vocabulary plus
    an ``edges`` array. Hypervisor detail (hosts, item ids, plumbing ports)
    never appears here."""
    if tenant_id not in topology.tenants:
        raise UnknownTenant(f"tenant {tenant_id!r} not found")

    by_seq = lambda values: sorted(values, key=lambda r: r.seq)
    networks = [n for n in by_seq(topology.networks.values()) if n.tenant_id == tenant_id and not n.is_external]
    shared = [n for n in by_seq(topology.networks.values()) if n.is_external]
    own_network_ids = {n.id for n in networks}
    subnets = [s for s in by_seq(topology.subnets.values()) if s.network_id in own_network_ids]
    subnet_ids = {s.id for s in subnets}
    ports = [
        p
        for p in by_seq(topology.ports.values())
        if p.tenant_id == tenant_id and p.device_owner == DeviceOwner.COMPUTE_NOVA
    ]
    routers = [r for r in by_seq(topology.routers.values()) if r.tenant_id == tenant_id]
    fips = [f for f in by_seq(topology.floating_ips.values()) if f.tenant_id == tenant_id]
    balancers = [b for b in by_seq(topology.balancers.values()) if b.tenant_id == tenant_id]

    edges: list[dict] = []
    for subnet in subnets:
        edges.append({"kind": "contains", "from": subnet.network_id, "to": subnet.id})
    for port in ports:
        if port.subnet_id in subnet_ids:
            edges.append({"kind": "contains", "from": port.subnet_id, "to": port.id})
    for router in routers:
        seen_subnets = []
        for pid in router.interface_port_ids:
            port = topology.ports.get(pid)
            if port and port.subnet_id in subnet_ids and port.subnet_id not in seen_subnets:
                seen_subnets.append(port.subnet_id)
                edges.append({"kind": "router_interface", "from": router.id, "to": port.subnet_id})
        if router.gateway_port_id:
            gport = topology.ports.get(router.gateway_port_id)
            if gport:
                gw_subnet = topology.subnets.get(gport.subnet_id)
                if gw_subnet:
                    edges.append({"kind": "router_gateway", "from": router.id, "to": gw_subnet.network_id})
    for fip in fips:
        edges.append({"kind": "floating_ip", "from": fip.id, "to": fip.attached_port_id})
        fport = topology.floating_ip_port(fip)
        if fport:
            fsubnet = topology.subnets.get(fport.subnet_id)
            if fsubnet:
                edges.append({"kind": "contains", "from": fsubnet.network_id, "to": fip.id})
    for balancer in balancers:
        edges.append({"kind": "balancer_vip", "from": balancer.id, "to": balancer.vip_subnet_id})
        for pid in balancer.backend_port_ids:
            edges.append({"kind": "balancer_member", "from": balancer.id, "to": pid})

    return {
        "tenant_id": tenant_id,
        "networks": [
            {"id": n.id, "tenant_id": n.tenant_id, "name": n.name, "is_external": n.is_external, "shared": False}
            for n in networks
        ]
        + [
            {"id": n.id, "tenant_id": n.tenant_id, "name": n.name, "is_external": True, "shared": True}
            for n in shared
        ],
        "subnets": [{"id": s.id, "network_id": s.network_id, "cidr": s.cidr} for s in subnets],
        "ports": [
            {
                "id": p.id,
                "tenant_id": p.tenant_id,
                "device_owner": p.device_owner.value,
                "subnet_id": p.subnet_id,
                "address": p.address,
            }
            for p in ports
        ],
        "routers": [{"id": r.id, "tenant_id": r.tenant_id} for r in routers],
        "floating_ips": [
            {"id": f.id, "tenant_id": f.tenant_id, "address": f.address, "attached_port_id": f.attached_port_id}
            for f in fips
        ],
        "balancers": [
            {
                "id": b.id,
                "tenant_id": b.tenant_id,
                "vip_address": b.vip_address,
                "vip_subnet_id": b.vip_subnet_id,
                "backend_port_ids": list(b.backend_port_ids),
            }
            for b in balancers
        ],
        "edges": edges,
    }
