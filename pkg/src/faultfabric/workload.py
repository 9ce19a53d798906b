"""Built-in workload generators (bandwidth stream and request/response load)
plus the metric calculator that turns flow events into throughput, latency,
response time, and error rate.

Generators are event-loop citizens of the fabric: everything is scheduled on
the simulated clock, so deterministic mode needs no threads. Metrics
attribute each transaction to the second of its request send time; that
keeps error windows aligned with injection phases regardless of timeout
lengths.
"""

import math
import random
import statistics
from dataclasses import dataclass, field

from .errors import BadAttach, EmptyWindow, NotOwner, ValidationError
from .fabric.core import Fabric
from .fabric.model import DeviceOwner
from .faults import derive_seed
from .packets import FlowEvent, FlowEventKind, Packet, PacketKind, Protocol

LINK_RATE_BYTES_PER_S = 10 * 1024 * 1024  # response streaming rate
DEFAULT_TIMEOUT_MS = 10_000.0


@dataclass(frozen=True)
class Attach:
    client_port_ids: tuple
    server_id: str

    @staticmethod
    def from_dict(obj: dict) -> "Attach":
        clients = obj.get("client_port_ids") or []
        if isinstance(clients, str):
            clients = [clients]
        return Attach(client_port_ids=tuple(clients), server_id=obj.get("server_id", ""))

    def to_dict(self) -> dict:
        return {"client_port_ids": list(self.client_port_ids), "server_id": self.server_id}


@dataclass(frozen=True)
class BandwidthConfig:
    protocol: Protocol
    pkts_per_s: float
    payload_bytes: int
    duration_ms: float
    attach: Attach
    service_port: int | None = None

    kind = "bandwidth"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "protocol": self.protocol.value,
            "pkts_per_s": self.pkts_per_s,
            "payload_bytes": self.payload_bytes,
            "duration_ms": self.duration_ms,
            "service_port": self.service_port,
            "attach": self.attach.to_dict(),
        }


@dataclass(frozen=True)
class RequestResponseConfig:
    concurrent_users: int
    reqs_per_min: float
    think_time_ms: float
    response_payload_bytes: int
    timeout_ms: float
    duration_ms: float
    attach: Attach
    request_payload_bytes: int = 128
    service_port: int | None = 80

    kind = "request_response"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "concurrent_users": self.concurrent_users,
            "reqs_per_min": self.reqs_per_min,
            "think_time_ms": self.think_time_ms,
            "response_payload_bytes": self.response_payload_bytes,
            "timeout_ms": self.timeout_ms,
            "duration_ms": self.duration_ms,
            "request_payload_bytes": self.request_payload_bytes,
            "service_port": self.service_port,
            "attach": self.attach.to_dict(),
        }


@dataclass(frozen=True)
class CustomConfig:
    """Custom generator plugged in through registered start/stop hooks."""

    name: str
    duration_ms: float
    params: dict
    attach: Attach

    kind = "custom"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "name": self.name,
            "duration_ms": self.duration_ms,
            "params": dict(self.params),
            "attach": self.attach.to_dict(),
        }


WorkloadConfig = BandwidthConfig | RequestResponseConfig | CustomConfig


def config_from_dict(obj: dict) -> WorkloadConfig:
    kind = obj.get("kind")
    attach = Attach.from_dict(obj.get("attach") or {})
    try:
        if kind == "custom":
            return CustomConfig(
                name=str(obj["name"]),
                duration_ms=float(obj["duration_ms"]),
                params=dict(obj.get("params") or {}),
                attach=attach,
            )
        if kind == "bandwidth":
            return BandwidthConfig(
                protocol=Protocol(obj.get("protocol", "udp")),
                pkts_per_s=float(obj["pkts_per_s"]),
                payload_bytes=int(obj.get("payload_bytes", 256)),
                duration_ms=float(obj["duration_ms"]),
                service_port=obj.get("service_port"),
                attach=attach,
            )
        if kind == "request_response":
            return RequestResponseConfig(
                concurrent_users=int(obj["concurrent_users"]),
                reqs_per_min=float(obj["reqs_per_min"]),
                think_time_ms=float(obj.get("think_time_ms", 0.0)),
                response_payload_bytes=int(obj.get("response_payload_bytes", 20_000)),
                timeout_ms=float(obj.get("timeout_ms", DEFAULT_TIMEOUT_MS)),
                duration_ms=float(obj["duration_ms"]),
                request_payload_bytes=int(obj.get("request_payload_bytes", 128)),
                service_port=obj.get("service_port", 80),
                attach=attach,
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"bad workload config: {exc}") from exc
    raise ValidationError(f"unknown workload kind {kind!r}")


def _payload(seed: int, *parts: str) -> bytes:
    rng = random.Random(derive_seed(seed, *parts))
    return rng.randbytes(16)


class WorkloadHandle:
    """One deployed generator; collects its own transaction-level events."""

    def __init__(self, fabric: Fabric, tenant_id: str, config: WorkloadConfig, workload_id: str):
        self.fabric = fabric
        self.tenant_id = tenant_id
        self.config = config
        self.workload_id = workload_id
        self.events: list[FlowEvent] = []
        self.dst_address: str = ""
        self._server_ports: list[str] = []
        self._scheduled = []
        self._stopped = False
        self._pending: dict[str, dict] = {}
        if isinstance(config, BandwidthConfig):
            if config.pkts_per_s <= 0 or config.duration_ms <= 0:
                raise ValidationError("bandwidth workload needs positive rate and duration")
        else:
            if config.reqs_per_min <= 0 or config.concurrent_users <= 0 or config.duration_ms <= 0:
                raise ValidationError("request/response workload needs positive rates and duration")
        self._resolve_attach()

    # --- wiring ---

    def _resolve_attach(self):
        topo = self.fabric.topology
        attach = self.config.attach
        if not attach.client_port_ids:
            raise BadAttach("workload needs at least one client port")
        for pid in attach.client_port_ids:
            port = topo.ports.get(pid)
            if port is None or port.device_owner != DeviceOwner.COMPUTE_NOVA:
                raise BadAttach(f"client port {pid!r} does not exist")
            if port.tenant_id != self.tenant_id:
                raise NotOwner(f"client port {pid!r} belongs to another tenant")
        sid = attach.server_id
        if sid in topo.balancers:
            balancer = topo.balancers[sid]
            if balancer.tenant_id != self.tenant_id:
                raise NotOwner(f"balancer {sid!r} belongs to another tenant")
            self.dst_address = balancer.vip_address
            self._server_ports = list(balancer.backend_port_ids)
        elif sid in topo.ports:
            port = topo.ports[sid]
            if port.tenant_id != self.tenant_id:
                raise NotOwner(f"server port {sid!r} belongs to another tenant")
            if port.device_owner != DeviceOwner.COMPUTE_NOVA:
                raise BadAttach(f"server port {sid!r} is not a compute:nova port")
            self.dst_address = port.address
            self._server_ports = [sid]
        elif sid in topo.floating_ips:
            fip = topo.floating_ips[sid]
            if fip.tenant_id != self.tenant_id:
                raise NotOwner(f"floating ip {sid!r} belongs to another tenant")
            self.dst_address = fip.address
            self._server_ports = [fip.attached_port_id]
        else:
            raise BadAttach(f"server {sid!r} not found")

    def _schedule(self, t, fn):
        handle = self.fabric.schedule(t, fn)
        self._scheduled.append(handle)
        return handle

    def stop(self):
        self._stopped = True
        for handle in self._scheduled:
            handle.cancel()
        for pid in self._server_ports:
            self.fabric.unbind_server(pid)

    # --- execution ---

    def start(self, at_ms: float | None = None) -> float:
        """Schedule one run of the workload beginning at ``at_ms``; returns
        the end of the send window."""
        start = self.fabric.now if at_ms is None else at_ms
        if isinstance(self.config, BandwidthConfig):
            return self._start_bandwidth(start)
        return self._start_request_response(start)

    def _record(self, event: FlowEvent):
        self.events.append(event)

    # bandwidth: an open datagram stream client -> server

    def _start_bandwidth(self, start: float) -> float:
        cfg = self.config
        if cfg.pkts_per_s <= 0:
            raise ValidationError("pkts_per_s must be positive")
        client = cfg.attach.client_port_ids[0]
        total = int(round(cfg.pkts_per_s * cfg.duration_ms / 1000.0))
        gap = 1000.0 / cfg.pkts_per_s
        flow_id = f"{self.workload_id}:bw"
        for k in range(total):
            t = start + k * gap
            self._schedule(t, lambda k=k, t=t: self._send_datagram(client, flow_id, k, t))
        return start + cfg.duration_ms

    def _send_datagram(self, client: str, flow_id: str, k: int, t: float):
        if self._stopped:
            return
        cfg = self.config
        payload = _payload(self.fabric.seed, flow_id, str(k)) * max(1, cfg.payload_bytes // 16)
        pkt = Packet(
            flow_id=flow_id,
            tenant_id=self.tenant_id,
            src_port_id=client,
            dst_address=self.dst_address,
            protocol=cfg.protocol,
            payload=payload[: max(1, cfg.payload_bytes)],
            sent_at=t,
            kind=PacketKind.DATAGRAM,
            service_port=cfg.service_port,
            packet_id=k,
        )
        self._record(
            FlowEvent(kind=FlowEventKind.SENT, flow_id=flow_id, tenant_id=self.tenant_id, t=t, sent_at=t, packet_id=k)
        )
        try:
            self.fabric.send_packet(pkt, on_terminal=self._record)
        except Exception:  # unreachable already recorded as a Dropped terminal
            pass

    # request/response: per-user loops against a server or balancer

    def _start_request_response(self, start: float) -> float:
        cfg = self.config
        if cfg.reqs_per_min <= 0 or cfg.concurrent_users <= 0:
            raise ValidationError("reqs_per_min and concurrent_users must be positive")
        for pid in self._server_ports:
            self.fabric.bind_server(pid, self._server_handler)
        for client in cfg.attach.client_port_ids:
            self.fabric.bind_server(client, self._client_handler)
        interval = cfg.concurrent_users * 60_000.0 / cfg.reqs_per_min
        end = start + cfg.duration_ms
        for u in range(cfg.concurrent_users):
            offset = u * interval / cfg.concurrent_users
            user = {
                "id": u,
                "client": cfg.attach.client_port_ids[u % len(cfg.attach.client_port_ids)],
                "interval": interval,
                "anchor": start + offset,
                "end": end,
                "req_seq": 0,
            }
            self._schedule(start + offset, lambda user=user: self._user_send(user))
        return end

    def _next_slot(self, user: dict, after: float) -> float:
        # first lattice point strictly after ``after``
        k = math.floor((after - user["anchor"]) / user["interval"]) + 1
        return user["anchor"] + max(0, k) * user["interval"]

    def _user_send(self, user: dict):
        if self._stopped:
            return
        t = self.fabric.now
        if t >= user["end"]:
            return
        cfg = self.config
        user["req_seq"] += 1
        flow_id = f"{self.workload_id}:u{user['id']}"
        request_id = f"{flow_id}:r{user['req_seq']}"
        payload = _payload(self.fabric.seed, request_id) * max(1, cfg.request_payload_bytes // 16)
        pkt = Packet(
            flow_id=flow_id,
            tenant_id=self.tenant_id,
            src_port_id=user["client"],
            dst_address=self.dst_address,
            protocol=Protocol.TCP,
            payload=payload[: max(1, cfg.request_payload_bytes)],
            sent_at=t,
            kind=PacketKind.REQUEST,
            service_port=cfg.service_port,
            request_id=request_id,
        )
        self._record(
            FlowEvent(
                kind=FlowEventKind.SENT, flow_id=flow_id, tenant_id=self.tenant_id,
                t=t, sent_at=t, request_id=request_id,
            )
        )
        deadline = t + cfg.timeout_ms
        timeout_handle = self._schedule(deadline, lambda: self._on_timeout(request_id))
        self._pending[request_id] = {
            "user": user,
            "sent_at": t,
            "deadline": deadline,
            "timeout": timeout_handle,
            "flow_id": flow_id,
        }
        try:
            self.fabric.send_packet(pkt, on_terminal=lambda ev, rid=request_id: self._on_request_terminal(rid, ev))
        except Exception:
            pass  # handled via the terminal event

    def _on_request_terminal(self, request_id: str, event: FlowEvent):
        if event.kind != FlowEventKind.DROPPED or event.reason != "unreachable" or event.is_duplicate:
            return  # fault drops surface as timeouts, like real lost traffic
        entry = self._pending.pop(request_id, None)
        if entry is None:
            return
        entry["timeout"].cancel()
        self._record(
            FlowEvent(
                kind=FlowEventKind.DROPPED, flow_id=entry["flow_id"], tenant_id=self.tenant_id,
                t=self.fabric.now, sent_at=entry["sent_at"], request_id=request_id, reason="unreachable",
            )
        )
        self._reschedule(entry["user"], self.fabric.now, think=False)

    def _on_timeout(self, request_id: str):
        entry = self._pending.pop(request_id, None)
        if entry is None or self._stopped:
            return
        event = FlowEvent(
            kind=FlowEventKind.TIMED_OUT, flow_id=entry["flow_id"], tenant_id=self.tenant_id,
            t=self.fabric.now, sent_at=entry["sent_at"], request_id=request_id,
        )
        self._record(event)
        self.fabric.log_event(event)
        self._reschedule(entry["user"], self.fabric.now, think=False)

    def _server_handler(self, packet: Packet, t: float, port_id: str):
        if self._stopped or packet.kind != PacketKind.REQUEST:
            return
        if packet.corrupted:
            return  # checksum-rejected request: the client will time out
        cfg = self.config
        body = _payload(self.fabric.seed, packet.request_id or "", "resp") * max(
            1, cfg.response_payload_bytes // 16
        )
        response = Packet(
            flow_id=packet.flow_id,
            tenant_id=packet.tenant_id,
            src_port_id=port_id,
            dst_address=packet.reply_to_address or "",
            protocol=packet.protocol,
            payload=body[: max(1, cfg.response_payload_bytes)],
            sent_at=t,
            kind=PacketKind.RESPONSE,
            service_port=packet.service_port,
            request_id=packet.request_id,
        )
        try:
            self.fabric.send_packet(response)
        except Exception:
            pass

    def _client_handler(self, packet: Packet, t: float, port_id: str):
        if self._stopped or packet.kind != PacketKind.RESPONSE or packet.request_id is None:
            return
        entry = self._pending.get(packet.request_id)
        if entry is None:
            return  # late response after timeout; already accounted
        cfg = self.config
        if packet.corrupted:
            del self._pending[packet.request_id]
            entry["timeout"].cancel()
            event = FlowEvent(
                kind=FlowEventKind.DELIVERED, flow_id=entry["flow_id"], tenant_id=self.tenant_id,
                t=t, sent_at=entry["sent_at"], request_id=packet.request_id,
                first_byte_t=t, last_byte_t=t, corrupted=True,
            )
            self._record(event)
            self._reschedule(entry["user"], t, think=False)
            return
        last_byte = t + packet.size * 1000.0 / LINK_RATE_BYTES_PER_S
        if last_byte >= entry["deadline"]:
            return  # stream cannot finish before the timeout fires
        del self._pending[packet.request_id]
        entry["timeout"].cancel()

        def complete():
            event = FlowEvent(
                kind=FlowEventKind.DELIVERED, flow_id=entry["flow_id"], tenant_id=self.tenant_id,
                t=last_byte, sent_at=entry["sent_at"], request_id=packet.request_id,
                first_byte_t=t, last_byte_t=last_byte,
            )
            self._record(event)
            self._reschedule(entry["user"], last_byte, think=True)

        self._schedule(last_byte, complete)

    def _reschedule(self, user: dict, resolve_t: float, think: bool):
        if self._stopped:
            return
        cfg = self.config
        ready = resolve_t + (cfg.think_time_ms if think else 0.0)
        next_t = max(self._next_slot(user, user.get("last_send", user["anchor"])), ready)
        if next_t >= user["end"]:
            return
        user["last_send"] = next_t
        self._schedule(next_t, lambda: self._user_send(user))


class CustomWorkloadHandle:
    """Adapter around user-registered start/stop hooks. The start hook
    schedules whatever traffic it wants on the fabric and records
    transaction events via ``record``; the stop hook tears down."""

    def __init__(self, fabric: Fabric, tenant_id: str, config: CustomConfig, workload_id: str, hooks: tuple):
        self.fabric = fabric
        self.tenant_id = tenant_id
        self.config = config
        self.workload_id = workload_id
        self.events: list[FlowEvent] = []
        self._start_hook, self._stop_hook = hooks
        self._scheduled = []

    def record(self, event: FlowEvent):
        self.events.append(event)

    def schedule(self, t: float, fn):
        handle = self.fabric.schedule(t, fn)
        self._scheduled.append(handle)
        return handle

    def start(self, at_ms: float | None = None) -> float:
        start = self.fabric.now if at_ms is None else at_ms
        self._start_hook(self, start)
        return start + self.config.duration_ms

    def stop(self):
        for handle in self._scheduled:
            handle.cancel()
        if self._stop_hook is not None:
            self._stop_hook(self)


_custom_workloads: dict[str, tuple] = {}


def register_workload_hooks(name: str, start_hook, stop_hook=None):
    """Plug in a custom generator: the start hook is called when the
    workload has to be started, the stop hook when it has to be stopped."""
    _custom_workloads[name] = (start_hook, stop_hook)


def registered_workload(name: str) -> bool:
    return name in _custom_workloads


def deploy_workload(fabric: Fabric, tenant_id: str, config: WorkloadConfig, workload_id: str = "wl0"):
    if tenant_id not in fabric.topology.tenants:
        raise NotOwner(f"tenant {tenant_id!r} not found")
    if isinstance(config, CustomConfig):
        hooks = _custom_workloads.get(config.name)
        if hooks is None:
            raise BadAttach(f"no custom workload registered under {config.name!r}")
        return CustomWorkloadHandle(fabric, tenant_id, config, workload_id, hooks)
    return WorkloadHandle(fabric, tenant_id, config, workload_id)


# ---------------------------------------------------------------------------
# metrics


@dataclass
class SeriesRow:
    t_s: int
    throughput: float
    mean_latency_ms: float
    mean_response_ms: float
    error_rate: float
    phase: str = "none"

    def to_dict(self) -> dict:
        return {
            "t_s": self.t_s,
            "throughput": self.throughput,
            "mean_latency_ms": self.mean_latency_ms,
            "mean_response_ms": self.mean_response_ms,
            "error_rate": self.error_rate,
            "phase": self.phase,
        }


@dataclass
class MetricsSummary:
    sent: int
    delivered: int
    errors: int
    duplicates: int
    throughput: float
    latency_mean_ms: float
    latency_stddev_ms: float
    response_mean_ms: float
    response_stddev_ms: float
    error_rate: float
    series: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "sent": self.sent,
            "delivered": self.delivered,
            "errors": self.errors,
            "duplicates": self.duplicates,
            "throughput": self.throughput,
            "latency_mean_ms": self.latency_mean_ms,
            "latency_stddev_ms": self.latency_stddev_ms,
            "response_mean_ms": self.response_mean_ms,
            "response_stddev_ms": self.response_stddev_ms,
            "error_rate": self.error_rate,
            "series": [row.to_dict() for row in self.series],
        }


@dataclass
class _Transaction:
    sent_at: float
    outcome: str = "pending"  # ok | error | pending
    latency_ms: float | None = None
    response_ms: float | None = None


def _transactions(events: list[FlowEvent], window: tuple[float, float]) -> list[_Transaction]:
    start, end = window
    txs: dict[str, _Transaction] = {}
    order: list[str] = []
    for ev in events:
        if ev.is_duplicate:
            continue
        key = ev.request_id or f"{ev.flow_id}#{ev.packet_id}"
        if ev.kind == FlowEventKind.SENT:
            if start <= ev.sent_at < end and key not in txs:
                txs[key] = _Transaction(sent_at=ev.sent_at)
                order.append(key)
            continue
        tx = txs.get(key)
        if tx is None or tx.outcome != "pending":
            continue
        if ev.kind == FlowEventKind.DELIVERED:
            if ev.corrupted:
                tx.outcome = "error"
            else:
                tx.outcome = "ok"
                first = ev.first_byte_t if ev.first_byte_t is not None else ev.t
                last = ev.last_byte_t if ev.last_byte_t is not None else ev.t
                tx.latency_ms = first - ev.sent_at
                tx.response_ms = last - ev.sent_at
        elif ev.kind in (FlowEventKind.DROPPED, FlowEventKind.TIMED_OUT):
            tx.outcome = "error"
    return [txs[k] for k in order]


def compute_metrics(events: list[FlowEvent], window: tuple[float, float], phase_for_second=None) -> MetricsSummary:
    """Aggregate transaction events over ``window`` (ms, half-open).

    Throughput is completed transactions per second; latency is first byte
    minus send, response time last byte minus send, both over successful
    transactions; error rate counts timeouts, unreachable drops, fault
    drops, and corrupted-rejected transactions against everything sent.
    """
    start, end = window
    if end <= start:
        raise EmptyWindow(f"window [{start}, {end}) is empty")
    txs = _transactions(events, window)
    sent = len(txs)
    oks = [t for t in txs if t.outcome == "ok"]
    errors = [t for t in txs if t.outcome == "error"]
    duplicates = sum(1 for ev in events if ev.is_duplicate and ev.kind == FlowEventKind.DELIVERED)
    latencies = [t.latency_ms for t in oks if t.latency_ms is not None]
    responses = [t.response_ms for t in oks if t.response_ms is not None]
    seconds = math.ceil((end - start) / 1000.0)
    series = []
    for s in range(seconds):
        lo = start + s * 1000.0
        hi = lo + 1000.0
        bucket = [t for t in txs if lo <= t.sent_at < hi]
        bucket_ok = [t for t in bucket if t.outcome == "ok"]
        bucket_err = [t for t in bucket if t.outcome == "error"]
        blat = [t.latency_ms for t in bucket_ok if t.latency_ms is not None]
        bresp = [t.response_ms for t in bucket_ok if t.response_ms is not None]
        series.append(
            SeriesRow(
                t_s=s,
                throughput=float(len(bucket_ok)),
                mean_latency_ms=statistics.fmean(blat) if blat else 0.0,
                mean_response_ms=statistics.fmean(bresp) if bresp else 0.0,
                error_rate=len(bucket_err) / len(bucket) if bucket else 0.0,
                phase=phase_for_second(lo) if phase_for_second else "none",
            )
        )
    return MetricsSummary(
        sent=sent,
        delivered=len(oks),
        errors=len(errors),
        duplicates=duplicates,
        throughput=len(oks) / ((end - start) / 1000.0),
        latency_mean_ms=statistics.fmean(latencies) if latencies else 0.0,
        latency_stddev_ms=statistics.stdev(latencies) if len(latencies) > 1 else 0.0,
        response_mean_ms=statistics.fmean(responses) if responses else 0.0,
        response_stddev_ms=statistics.stdev(responses) if len(responses) > 1 else 0.0,
        error_rate=len(errors) / sent if sent else 0.0,
        series=series,
    )
