"""Per-host injection agents and their command protocol.

Agents hold the active ItemInjectionStates for items located on their host
and are consulted for every packet hop during fabric stepping. Commands
(inject / clear / clear_all / status) arrive either in-process or, in socket
mode, as length-prefixed JSON frames over TCP — same schema either way.
"""

import json
import socket
import socketserver
import threading
from dataclasses import dataclass

from . import faults
from .errors import FaultFabricError
from .faults import FaultSpec, ItemInjectionState, PacketOutcome
from .packets import Packet

# --- commands and replies ---


@dataclass(frozen=True)
class Inject:
    item_id: str
    spec: FaultSpec


@dataclass(frozen=True)
class Clear:
    item_id: str


@dataclass(frozen=True)
class ClearAll:
    pass


@dataclass(frozen=True)
class Status:
    pass


AgentCommand = Inject | Clear | ClearAll | Status


@dataclass(frozen=True)
class Ack:
    command_seq: int


@dataclass(frozen=True)
class Error:
    code: str
    message: str
    command_seq: int


@dataclass(frozen=True)
class StatusReport:
    active: list
    command_seq: int


AgentReply = Ack | Error | StatusReport


def command_to_dict(cmd: AgentCommand) -> dict:
    if isinstance(cmd, Inject):
        return {"command": "inject", "item_id": cmd.item_id, "spec": cmd.spec.to_dict()}
    if isinstance(cmd, Clear):
        return {"command": "clear", "item_id": cmd.item_id}
    if isinstance(cmd, ClearAll):
        return {"command": "clear_all"}
    if isinstance(cmd, Status):
        return {"command": "status"}
    raise ValueError(f"unknown command {cmd!r}")


def command_from_dict(obj: dict) -> AgentCommand:
    name = obj.get("command")
    if name == "inject":
        return Inject(item_id=obj["item_id"], spec=FaultSpec.from_dict(obj["spec"]))
    if name == "clear":
        return Clear(item_id=obj["item_id"])
    if name == "clear_all":
        return ClearAll()
    if name == "status":
        return Status()
    raise ValueError(f"unknown command discriminant {name!r}")


def reply_to_dict(reply: AgentReply) -> dict:
    if isinstance(reply, Ack):
        return {"reply": "ack", "command_seq": reply.command_seq}
    if isinstance(reply, Error):
        return {"reply": "error", "code": reply.code, "message": reply.message, "command_seq": reply.command_seq}
    if isinstance(reply, StatusReport):
        return {"reply": "status", "active": reply.active, "command_seq": reply.command_seq}
    raise ValueError(f"unknown reply {reply!r}")


def reply_from_dict(obj: dict) -> AgentReply:
    name = obj.get("reply")
    if name == "ack":
        return Ack(command_seq=obj["command_seq"])
    if name == "error":
        return Error(code=obj["code"], message=obj.get("message", ""), command_seq=obj["command_seq"])
    if name == "status":
        return StatusReport(active=obj.get("active", []), command_seq=obj["command_seq"])
    raise ValueError(f"unknown reply discriminant {name!r}")


@dataclass
class AuditEntry:
    """One non-pass-through ruling by an agent, for trace audits."""

    t: float
    host_id: str
    item_id: str
    outcome: str
    flow_id: str
    tenant_id: str
    packet_id: int
    is_duplicate: bool = False


class Agent:
    """Injection agent for one host.

    ``item_locator`` maps item id -> InjectionItem (or None); the agent uses
    it to refuse commands for items that live elsewhere.
    """

    def __init__(self, host_id: str, item_locator, clock=None):
        self.host_id = host_id
        self._locate = item_locator
        self._clock = clock or (lambda: 0.0)
        self.active: dict[str, ItemInjectionState] = {}
        self.command_log: list[tuple[int, dict, str]] = []
        self.audit: list[AuditEntry] = []
        self._seq = 0
        self._lock = threading.Lock()

    def handle_command(self, cmd: AgentCommand) -> AgentReply:
        with self._lock:
            self._seq += 1
            seq = self._seq
            reply = self._apply(cmd, seq)
            self.command_log.append((seq, command_to_dict(cmd), reply_to_dict(reply)["reply"]))
            return reply

    def _apply(self, cmd: AgentCommand, seq: int) -> AgentReply:
        now = self._clock()
        if isinstance(cmd, Inject):
            item = self._locate(cmd.item_id)
            if item is None or item.location != self.host_id:
                return Error(code="wrong_host", message=f"item {cmd.item_id!r} is not on host {self.host_id}", command_seq=seq)
            if cmd.item_id in self.active:
                return Error(code="already_injected", message=f"item {cmd.item_id!r} already has an active injection", command_seq=seq)
            self.active[cmd.item_id] = ItemInjectionState(spec=cmd.spec, started_at=now, item_id=cmd.item_id)
            return Ack(command_seq=seq)
        if isinstance(cmd, Clear):
            if cmd.item_id not in self.active:
                item = self._locate(cmd.item_id)
                if item is None or item.location != self.host_id:
                    return Error(code="wrong_host", message=f"item {cmd.item_id!r} is not on host {self.host_id}", command_seq=seq)
                return Error(code="not_injected", message=f"item {cmd.item_id!r} has no active injection", command_seq=seq)
            del self.active[cmd.item_id]
            return Ack(command_seq=seq)
        if isinstance(cmd, ClearAll):
            self.active.clear()
            return Ack(command_seq=seq)
        if isinstance(cmd, Status):
            now_t = now
            report = [
                {
                    "item_id": item_id,
                    "spec": state.spec.to_dict(),
                    "phase": "injecting" if state.in_window(now_t) else "expired",
                }
                for item_id, state in self.active.items()
            ]
            return StatusReport(active=report, command_seq=seq)
        return Error(code="bad_command", message=f"unknown command {cmd!r}", command_seq=seq)

    def intercept(self, item_id: str, packet: Packet, t: float, hop_latency_ms: float = 0.5) -> PacketOutcome:
        state = self.active.get(item_id)
        if state is None or not state.in_window(t):
            return faults.DELIVER
        outcome = faults.apply_fault(state, packet, t, hop_latency_ms=hop_latency_ms)
        if not isinstance(outcome, faults.Deliver):
            self.audit.append(
                AuditEntry(
                    t=t,
                    host_id=self.host_id,
                    item_id=item_id,
                    outcome=outcome.kind,
                    flow_id=packet.flow_id,
                    tenant_id=packet.tenant_id,
                    packet_id=packet.packet_id,
                    is_duplicate=packet.is_duplicate,
                )
            )
        return outcome


# --- socket transport: 4-byte big-endian length + UTF-8 JSON body ---


def encode_frame(obj: dict) -> bytes:
    body = json.dumps(obj).encode("utf-8")
    return len(body).to_bytes(4, "big") + body


def read_frame(sock: socket.socket) -> dict | None:
    header = _read_exact(sock, 4)
    if header is None:
        return None
    length = int.from_bytes(header, "big")
    body = _read_exact(sock, length)
    if body is None:
        return None
    return json.loads(body.decode("utf-8"))


def _read_exact(sock: socket.socket, n: int) -> bytes | None:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return buf


class AgentSocketServer:
    """Serves one agent's command channel over TCP."""

    def __init__(self, agent: Agent, host: str = "127.0.0.1", port: int = 0):
        self.agent = agent
        outer = self

        class Handler(socketserver.BaseRequestHandler):
            def handle(self):
                while True:
                    obj = read_frame(self.request)
                    if obj is None:
                        return
                    try:
                        cmd = command_from_dict(obj)
                        reply = outer.agent.handle_command(cmd)
                        payload = reply_to_dict(reply)
                    except (ValueError, KeyError, FaultFabricError) as exc:
                        payload = {"reply": "error", "code": "bad_command", "message": str(exc), "command_seq": -1}
                    self.request.sendall(encode_frame(payload))

        self._server = socketserver.ThreadingTCPServer((host, port), Handler)
        self._server.daemon_threads = True
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address

    def start(self):
        self._thread.start()

    def stop(self):
        self._server.shutdown()
        self._server.server_close()


class AgentSocketClient:
    """Client side of the agent wire protocol; mirrors Agent.handle_command."""

    def __init__(self, host: str, port: int):
        self._sock = socket.create_connection((host, port))

    def handle_command(self, cmd: AgentCommand) -> AgentReply:
        self._sock.sendall(encode_frame(command_to_dict(cmd)))
        obj = read_frame(self._sock)
        if obj is None:
            raise ConnectionError("agent closed the connection")
        return reply_from_dict(obj)

    def close(self):
        self._sock.close()
