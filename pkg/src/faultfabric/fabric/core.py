"""Deterministic discrete-event fabric: clock, event queue, packet transport
along resolved item paths, balancer with health monitor, and resource
delete/restore wired to the live item map.

Determinism contract: events execute in (timestamp, insertion sequence)
order; all randomness is derived from explicit seeds; identical topology,
seed, and scheduled inputs produce identical event traces.
"""

import heapq
from dataclasses import dataclass, field
from enum import Enum

from .. import mapper
from ..agents import Agent
from ..errors import Busy, NoBackendAvailable, NotFound, Unreachable, ValidationError
from ..faults import Delay, Deliver, DeliverAndDuplicate, DeliverCorrupted, Drop
from ..packets import FlowEvent, FlowEventKind, Packet, PacketKind, Protocol
from .model import Balancer, DeviceOwner, Port, ResourceSnapshot, Topology


class ClockMode(str, Enum):
    DETERMINISTIC = "deterministic"
    WALL_ANCHORED = "wall_anchored"


@dataclass
class Clock:
    now: float = 0.0
    mode: ClockMode = ClockMode.DETERMINISTIC


@dataclass
class EventHandle:
    t: float
    seq: int
    fn: object
    cancelled: bool = False

    def cancel(self):
        self.cancelled = True

    def __lt__(self, other):
        return (self.t, self.seq) < (other.t, other.seq)


@dataclass
class BackendState:
    healthy: bool = True
    consecutive_failures: int = 0
    isolated_at: float | None = None  # currently isolated since
    transitions: list = field(default_factory=list)  # ("isolated"|"recovered", t)

    def first_isolated_at(self) -> float | None:
        for what, t in self.transitions:
            if what == "isolated":
                return t
        return None


@dataclass
class BalancerRuntime:
    balancer: Balancer
    rr_cursor: int = 0
    backends: dict = field(default_factory=dict)  # port_id -> BackendState
    pending: dict = field(default_factory=dict)  # request_id -> (client reply address, client tenant)
    probe_gen: int = 0
    probe_seq: int = 0

    def reset(self):
        self.rr_cursor = 0
        self.pending.clear()
        self.probe_gen += 1
        for state in self.backends.values():
            state.healthy = True
            state.consecutive_failures = 0
            state.isolated_at = None
            state.transitions.clear()


class Fabric:
    """Single-writer simulation engine over a validated topology."""

    def __init__(self, topology: Topology, seed: int = 0, mode: ClockMode = ClockMode.DETERMINISTIC):
        self.topology = topology
        self.seed = seed
        self.clock = Clock(0.0, mode)
        self._heap: list[EventHandle] = []
        self._event_seq = 0
        self.item_map = mapper.build_item_map(topology)
        self.agents: dict[str, Agent] = {
            host_id: Agent(host_id, lambda iid: self.item_map.get(iid), clock=lambda: self.clock.now)
            for host_id in topology.hosts
        }
        self.flow_log: list[FlowEvent] = []
        self._servers: dict[str, object] = {}  # port_id -> handler(packet, t)
        self.balancer_runtimes: dict[str, BalancerRuntime] = {}
        for balancer in topology.balancers.values():
            runtime = BalancerRuntime(balancer=balancer)
            for pid in balancer.backend_port_ids:
                runtime.backends[pid] = BackendState()
            self.balancer_runtimes[balancer.id] = runtime
        self._start_probe_cycles(0.0)

    # ------------------------------------------------------------------
    # clock and event queue

    @property
    def now(self) -> float:
        return self.clock.now

    def schedule(self, t: float, fn) -> EventHandle:
        if t < self.clock.now:
            raise ValidationError(f"cannot schedule at {t} before now {self.clock.now}")
        self._event_seq += 1
        handle = EventHandle(t=t, seq=self._event_seq, fn=fn)
        heapq.heappush(self._heap, handle)
        return handle

    def step(self, until: float) -> list[FlowEvent]:
        """Process every event with timestamp <= until, in (time, seq)
        order, and advance the clock to ``until``. Returns the flow events
        generated during this call."""
        if until < self.clock.now:
            raise ValidationError(f"cannot step backwards to {until}")
        log_start = len(self.flow_log)
        while self._heap and self._heap[0].t <= until:
            handle = heapq.heappop(self._heap)
            if handle.cancelled:
                continue
            self.clock.now = handle.t
            handle.fn()
        self.clock.now = until
        return self.flow_log[log_start:]

    def next_event_time(self) -> float | None:
        while self._heap and self._heap[0].cancelled:
            heapq.heappop(self._heap)
        return self._heap[0].t if self._heap else None

    def log_event(self, event: FlowEvent):
        self.flow_log.append(event)

    # ------------------------------------------------------------------
    # topology access and mutation

    def rebuild_items(self):
        self.item_map = mapper.build_item_map(self.topology)

    def hop_latency_ms(self, item_id: str) -> float:
        item = self.item_map.get(item_id)
        if item is None:
            return 0.5
        host = self.topology.hosts.get(item.location)
        return host.link_latency_ms if host else 0.5

    def snapshot_resource(self, kind: str, rid: str) -> ResourceSnapshot:
        return self.topology.snapshot(kind, rid, taken_at=self.clock.now)

    def delete_resource(self, kind: str, rid: str) -> ResourceSnapshot:
        members, _, _ = self.topology.closure(kind, rid)
        closure_item_ids = {
            mapper.item_id_for_port(obj.id) for k, obj in members if k == "port"
        }
        for agent in self.agents.values():
            busy = closure_item_ids & set(agent.active)
            if busy:
                raise Busy(f"active injection on items {sorted(busy)}")
        snap = self.topology.delete(kind, rid, taken_at=self.clock.now)
        self.rebuild_items()
        return snap

    def restore_resource(self, snap: ResourceSnapshot):
        self.topology.restore(snap)
        self.rebuild_items()

    # ------------------------------------------------------------------
    # routing

    def _subnet_adjacency(self) -> dict:
        """subnet id -> list of (neighbor subnet id, exit item id, entry item id)."""
        adj: dict[str, list[tuple[str, str, str]]] = {}
        for router in sorted(self.topology.routers.values(), key=lambda r: r.seq):
            attach: list[Port] = []
            for pid in router.interface_port_ids:
                port = self.topology.ports.get(pid)
                if port is not None:
                    attach.append(port)
            if router.gateway_port_id is not None:
                gport = self.topology.ports.get(router.gateway_port_id)
                if gport is not None:
                    attach.append(gport)
            attach.sort(key=lambda p: p.seq)
            for a in attach:
                for b in attach:
                    if a.id == b.id or a.subnet_id == b.subnet_id:
                        continue
                    adj.setdefault(a.subnet_id, []).append(
                        (b.subnet_id, mapper.item_id_for_port(a.id), mapper.item_id_for_port(b.id))
                    )
        return adj

    def _subnet_route(self, src_subnet: str, dst_subnet: str) -> list[str]:
        """Items traversed between two subnets (router interface/gateway
        items, in hop order); empty when the subnets coincide."""
        if src_subnet == dst_subnet:
            return []
        adj = self._subnet_adjacency()
        frontier = [(src_subnet, [])]
        visited = {src_subnet}
        while frontier:
            next_frontier = []
            for subnet, items in frontier:
                for neighbor, exit_item, entry_item in adj.get(subnet, []):
                    if neighbor in visited:
                        continue
                    path = items + [exit_item, entry_item]
                    if neighbor == dst_subnet:
                        return path
                    visited.add(neighbor)
                    next_frontier.append((neighbor, path))
            frontier = next_frontier
        raise Unreachable(f"no route between subnets {src_subnet!r} and {dst_subnet!r}")

    def _find_endpoint(self, tenant_id: str, dst_address: str, src_subnet: str | None):
        for balancer in sorted(self.topology.balancers.values(), key=lambda b: b.seq):
            if balancer.tenant_id == tenant_id and balancer.vip_address == dst_address:
                return ("balancer", balancer)
        for fip in sorted(self.topology.floating_ips.values(), key=lambda f: f.seq):
            if fip.tenant_id == tenant_id and fip.address == dst_address:
                return ("floating_ip", fip)
        candidates = [
            p
            for p in sorted(self.topology.ports.values(), key=lambda p: p.seq)
            if p.tenant_id == tenant_id and p.address == dst_address
            and p.device_owner == DeviceOwner.COMPUTE_NOVA
        ]
        if not candidates:
            raise Unreachable(f"no endpoint with address {dst_address!r} for tenant {tenant_id!r}")
        for port in candidates:
            if port.subnet_id == src_subnet:
                return ("port", port)
        return ("port", candidates[0])

    def _resolve(self, tenant_id: str, src_subnet: str, dst_address: str):
        """Route from a subnet to an address: (item ids after the source
        tap, endpoint descriptor)."""
        etype, obj = self._find_endpoint(tenant_id, dst_address, src_subnet)
        if etype == "port":
            items = self._subnet_route(src_subnet, obj.subnet_id)
            return items + [mapper.item_id_for_port(obj.id)], ("port", obj.id)
        if etype == "balancer":
            if obj.vip_subnet_id not in self.topology.subnets:
                raise Unreachable(f"balancer {obj.id} vip subnet is gone")
            items = self._subnet_route(src_subnet, obj.vip_subnet_id)
            return items, ("balancer", obj.id)
        # floating ip: out through the external network, through the fip
        # interface, then down to the attached port
        fip = obj
        fport = self.topology.floating_ip_port(fip)
        attached = self.topology.ports.get(fip.attached_port_id)
        if fport is None or attached is None:
            raise Unreachable(f"floating ip {fip.id} has no backing interface")
        out_leg = self._subnet_route(src_subnet, fport.subnet_id)
        in_leg = self._subnet_route(fport.subnet_id, attached.subnet_id)
        items = out_leg + [mapper.item_id_for_port(fport.id)] + in_leg + [mapper.item_id_for_port(attached.id)]
        return items, ("port", attached.id)

    def route_path(self, src_port_id: str, dst_address: str) -> list[str]:
        """Ordered injection-item ids a packet from ``src_port_id`` to
        ``dst_address`` traverses (source tap first)."""
        src = self.topology.ports.get(src_port_id)
        if src is None:
            raise NotFound(f"port {src_port_id!r} not found")
        if src.device_owner != DeviceOwner.COMPUTE_NOVA:
            raise ValidationError(f"port {src_port_id!r} is not a compute:nova port")
        items, _ = self._resolve(src.tenant_id, src.subnet_id, dst_address)
        return [mapper.item_id_for_port(src.id)] + items

    # ------------------------------------------------------------------
    # servers and transport

    def bind_server(self, port_id: str, handler):
        if port_id not in self.topology.ports:
            raise NotFound(f"port {port_id!r} not found")
        self._servers[port_id] = handler

    def unbind_server(self, port_id: str):
        self._servers.pop(port_id, None)

    def send_packet(self, packet: Packet, on_terminal=None) -> None:
        """Launch a packet. Emits a Sent event, resolves the route now, and
        raises Unreachable (after logging the Dropped terminal) when no
        route exists. ``on_terminal`` fires once with the terminal event."""
        if not packet.is_duplicate:
            self.log_event(
                FlowEvent(
                    kind=FlowEventKind.SENT,
                    flow_id=packet.flow_id,
                    tenant_id=packet.tenant_id,
                    t=self.clock.now,
                    sent_at=packet.sent_at,
                    packet_id=packet.packet_id,
                    request_id=packet.request_id,
                )
            )
        src = self.topology.ports.get(packet.src_port_id)
        if src is None:
            self._terminal_drop(packet, self.clock.now, "unreachable", on_terminal)
            raise Unreachable(f"source port {packet.src_port_id!r} is gone")
        if packet.reply_to_address is None:
            packet.reply_to_address = src.address
        try:
            items, endpoint = self._resolve(packet.tenant_id, src.subnet_id, packet.dst_address)
        except Unreachable:
            self._terminal_drop(packet, self.clock.now, "unreachable", on_terminal)
            raise
        path = [mapper.item_id_for_port(src.id)] + items
        self.schedule(self.clock.now, lambda: self._hop(packet, path, 0, endpoint, on_terminal))

    def send_from_subnet(self, packet: Packet, src_subnet_id: str, on_terminal=None) -> None:
        """Internal senders (balancer legs, probes) that originate on a
        subnet rather than at a port."""
        try:
            items, endpoint = self._resolve(packet.tenant_id, src_subnet_id, packet.dst_address)
        except Unreachable:
            self._terminal_drop(packet, self.clock.now, "unreachable", on_terminal)
            return
        self.schedule(self.clock.now, lambda: self._hop(packet, items, 0, endpoint, on_terminal))

    def _terminal_drop(self, packet: Packet, t: float, reason: str, on_terminal):
        event = FlowEvent(
            kind=FlowEventKind.DROPPED,
            flow_id=packet.flow_id,
            tenant_id=packet.tenant_id,
            t=t,
            sent_at=packet.sent_at,
            packet_id=packet.packet_id,
            request_id=packet.request_id,
            is_duplicate=packet.is_duplicate,
            reason=reason,
        )
        self.log_event(event)
        if on_terminal is not None:
            on_terminal(event)

    def _hop(self, packet: Packet, path: list[str], idx: int, endpoint, on_terminal):
        t = self.clock.now
        if idx >= len(path):
            self._arrive(packet, endpoint, t, on_terminal)
            return
        item = self.item_map.get(path[idx])
        if item is None or item.port_id not in self.topology.ports:
            self._terminal_drop(packet, t, "unreachable", on_terminal)
            return
        latency = self.hop_latency_ms(item.id)
        agent = self.agents[item.location]
        outcome = agent.intercept(item.id, packet, t, hop_latency_ms=latency)
        if isinstance(outcome, Deliver):
            self.schedule(t + latency, lambda: self._hop(packet, path, idx + 1, endpoint, on_terminal))
        elif isinstance(outcome, Drop):
            self._terminal_drop(packet, t, "fault", on_terminal)
        elif isinstance(outcome, Delay):
            self.schedule(t + latency + outcome.extra_ms, lambda: self._hop(packet, path, idx + 1, endpoint, on_terminal))
        elif isinstance(outcome, DeliverCorrupted):
            packet.payload = outcome.payload
            packet.size = len(outcome.payload)
            packet.corrupted = True
            self.log_event(
                FlowEvent(
                    kind=FlowEventKind.CORRUPTED,
                    flow_id=packet.flow_id,
                    tenant_id=packet.tenant_id,
                    t=t,
                    sent_at=packet.sent_at,
                    packet_id=packet.packet_id,
                    request_id=packet.request_id,
                    is_duplicate=packet.is_duplicate,
                )
            )
            self.schedule(t + latency, lambda: self._hop(packet, path, idx + 1, endpoint, on_terminal))
        elif isinstance(outcome, DeliverAndDuplicate):
            copy = packet.copy()
            copy.is_duplicate = True
            self.log_event(
                FlowEvent(
                    kind=FlowEventKind.DUPLICATED,
                    flow_id=packet.flow_id,
                    tenant_id=packet.tenant_id,
                    t=t,
                    sent_at=packet.sent_at,
                    packet_id=packet.packet_id,
                    request_id=packet.request_id,
                )
            )
            self.schedule(t + latency, lambda: self._hop(packet, path, idx + 1, endpoint, on_terminal))
            self.schedule(
                t + latency + outcome.copy_delay_ms,
                lambda: self._hop(copy, path, idx + 1, endpoint, on_terminal),
            )
        else:
            raise ValidationError(f"unknown packet outcome {outcome!r}")

    def _arrive(self, packet: Packet, endpoint, t: float, on_terminal):
        event = FlowEvent(
            kind=FlowEventKind.DELIVERED,
            flow_id=packet.flow_id,
            tenant_id=packet.tenant_id,
            t=t,
            sent_at=packet.sent_at,
            packet_id=packet.packet_id,
            request_id=packet.request_id,
            corrupted=packet.corrupted,
            is_duplicate=packet.is_duplicate,
        )
        self.log_event(event)
        if on_terminal is not None:
            on_terminal(event)
        etype, eid = endpoint
        if etype == "balancer":
            self._balancer_receive(eid, packet, t)
            return
        if packet.flow_id.startswith("hc:") and packet.kind == PacketKind.REQUEST:
            self._probe_pong(packet, t, eid)
            return
        handler = self._servers.get(eid)
        if handler is not None:
            handler(packet, t, eid)

    # ------------------------------------------------------------------
    # balancer and health monitor

    def balancer_dispatch(self, balancer_id: str, packet: Packet) -> str:
        """Round-robin over currently healthy backends; raises
        NoBackendAvailable when every backend is unhealthy or gone."""
        runtime = self.balancer_runtimes.get(balancer_id)
        if runtime is None:
            raise NotFound(f"balancer {balancer_id!r} not found")
        del packet  # selection is stateful round robin, not content-based
        order = runtime.balancer.backend_port_ids
        n = len(order)
        for i in range(n):
            pid = order[(runtime.rr_cursor + i) % n]
            state = runtime.backends[pid]
            if state.healthy and pid in self.topology.ports:
                runtime.rr_cursor = (runtime.rr_cursor + i + 1) % n
                return pid
        raise NoBackendAvailable(f"balancer {balancer_id!r} has no healthy backend")

    def _balancer_receive(self, balancer_id: str, packet: Packet, t: float):
        runtime = self.balancer_runtimes.get(balancer_id)
        if runtime is None:
            return
        balancer = runtime.balancer
        if packet.kind == PacketKind.REQUEST:
            try:
                backend_pid = self.balancer_dispatch(balancer_id, packet)
            except NoBackendAvailable:
                return  # client times out; nothing to forward
            backend = self.topology.ports[backend_pid]
            if packet.request_id is not None and not packet.flow_id.startswith("hc:"):
                runtime.pending[packet.request_id] = (packet.reply_to_address, packet.tenant_id)
            forwarded = packet.copy()
            forwarded.src_port_id = f"balancer:{balancer.id}"
            forwarded.dst_address = backend.address
            forwarded.reply_to_address = balancer.vip_address
            self.send_from_subnet(forwarded, balancer.vip_subnet_id)
            return
        if packet.kind == PacketKind.RESPONSE and packet.request_id is not None:
            if packet.flow_id.startswith("hc:"):
                self._probe_response(balancer_id, packet, t)
                return
            target = runtime.pending.pop(packet.request_id, None)
            if target is None:
                return  # stale response; client already moved on
            reply_address, _ = target
            back = packet.copy()
            back.src_port_id = f"balancer:{balancer.id}"
            back.dst_address = reply_address
            back.reply_to_address = balancer.vip_address
            self.send_from_subnet(back, balancer.vip_subnet_id)

    def _start_probe_cycles(self, t0: float):
        for runtime in self.balancer_runtimes.values():
            for pid in runtime.balancer.backend_port_ids:
                self._schedule_probe(runtime, pid, t0, runtime.probe_gen)

    def _schedule_probe(self, runtime: BalancerRuntime, backend_pid: str, at: float, gen: int):
        self.schedule(at, lambda: self._run_probe(runtime, backend_pid, gen))

    def _run_probe(self, runtime: BalancerRuntime, backend_pid: str, gen: int):
        if gen != runtime.probe_gen:
            return
        balancer = runtime.balancer
        health = balancer.health
        start = self.clock.now
        runtime.probe_seq += 1
        probe = {"done": False}
        request_id = f"hc:{balancer.id}:{backend_pid}:{runtime.probe_seq}"

        def attempt():
            if probe["done"] or gen != runtime.probe_gen:
                return
            backend = self.topology.ports.get(backend_pid)
            if backend is None:
                return  # no attempt can succeed; deadline will fire
            pkt = Packet(
                flow_id=f"hc:{balancer.id}:{backend_pid}",
                tenant_id=balancer.tenant_id,
                src_port_id=f"balancer:{balancer.id}",
                dst_address=backend.address,
                protocol=Protocol.TCP,
                payload=b"hc-ping",
                sent_at=self.clock.now,
                kind=PacketKind.REQUEST,
                request_id=request_id,
                reply_to_address=balancer.vip_address,
            )
            self.send_from_subnet(pkt, balancer.vip_subnet_id)

        n_attempts = max(1, int(health.timeout_ms // health.attempt_interval_ms))
        for i in range(n_attempts):
            self.schedule(start + i * health.attempt_interval_ms, attempt)

        def deadline():
            if probe["done"] or gen != runtime.probe_gen:
                return
            probe["done"] = True
            self._probe_result(runtime, backend_pid, success=False)

        self.schedule(start + health.timeout_ms, deadline)
        runtime.pending[request_id] = probe  # so responses can find the probe
        self._schedule_probe(runtime, backend_pid, start + health.period_ms, gen)

    def _probe_pong(self, packet: Packet, t: float, port_id: str):
        # the backend VM answers health checks as long as its port exists
        if port_id not in self.topology.ports:
            return
        pong = Packet(
            flow_id=packet.flow_id,
            tenant_id=packet.tenant_id,
            src_port_id=port_id,
            dst_address=packet.reply_to_address or "",
            protocol=Protocol.TCP,
            payload=b"hc-pong",
            sent_at=t,
            kind=PacketKind.RESPONSE,
            request_id=packet.request_id,
        )
        try:
            self.send_packet(pong)
        except Unreachable:
            pass

    def _probe_response(self, balancer_id: str, packet: Packet, t: float):
        runtime = self.balancer_runtimes.get(balancer_id)
        if runtime is None or packet.request_id is None:
            return
        probe = runtime.pending.pop(packet.request_id, None)
        if probe is None or probe.get("done"):
            return
        probe["done"] = True
        backend_pid = packet.request_id.split(":")[2]
        self._probe_result(runtime, backend_pid, success=True)

    def _probe_result(self, runtime: BalancerRuntime, backend_pid: str, success: bool):
        state = runtime.backends.get(backend_pid)
        if state is None:
            return
        if success:
            state.consecutive_failures = 0
            if not state.healthy:
                state.healthy = True
                state.isolated_at = None
                state.transitions.append(("recovered", self.clock.now))
        else:
            state.consecutive_failures += 1
            if state.consecutive_failures >= runtime.balancer.health.max_retries and state.healthy:
                state.healthy = False
                state.isolated_at = self.clock.now
                state.transitions.append(("isolated", self.clock.now))

    def reset_service_state(self):
        """Fresh balancer runtime (round-robin cursor, health, probe
        schedule) anchored at the current clock; campaign runs call this so
        their behavior does not depend on prior fabric history."""
        for runtime in self.balancer_runtimes.values():
            runtime.reset()
        self._start_probe_cycles(self.clock.now)

    # ------------------------------------------------------------------
    # audits

    def audit_entries(self):
        entries = []
        for host_id in sorted(self.agents):
            entries.extend(self.agents[host_id].audit)
        entries.sort(key=lambda e: e.t)
        return entries

    def active_injection_count(self) -> int:
        return sum(len(agent.active) for agent in self.agents.values())


def load_topology(doc: dict, seed: int = 0, mode: ClockMode = ClockMode.DETERMINISTIC) -> Fabric:
    """Build a fabric from a topology document (already-parsed JSON)."""
    return Fabric(Topology.parse(doc), seed=seed, mode=mode)


def load_topology_file(path: str, seed: int = 0, mode: ClockMode = ClockMode.DETERMINISTIC) -> Fabric:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return Fabric(Topology.parse_json(text), seed=seed, mode=mode)
