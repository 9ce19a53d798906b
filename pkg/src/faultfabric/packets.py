"""Packet and flow primitives shared by the fabric and the fault engine."""

from dataclasses import dataclass, field
from enum import Enum


class Protocol(str, Enum):
    TCP = "tcp"
    UDP = "udp"


class PacketKind(str, Enum):
    REQUEST = "request"
    RESPONSE = "response"
    DATAGRAM = "datagram"


@dataclass
class Packet:
    """One unit of simulated traffic.

    ``sent_at`` is simulated milliseconds. ``size`` always equals
    ``len(payload)``; construction enforces it.
    """

    flow_id: str
    tenant_id: str
    src_port_id: str
    dst_address: str
    protocol: Protocol
    payload: bytes
    sent_at: float
    kind: PacketKind = PacketKind.DATAGRAM
    service_port: int | None = None
    corrupted: bool = False
    request_id: str | None = None
    is_duplicate: bool = False
    packet_id: int = 0
    reply_to_address: str | None = None
    size: int = field(init=False)

    def __post_init__(self):
        self.size = len(self.payload)

    def copy(self) -> "Packet":
        dup = Packet(
            flow_id=self.flow_id,
            tenant_id=self.tenant_id,
            src_port_id=self.src_port_id,
            dst_address=self.dst_address,
            protocol=self.protocol,
            payload=self.payload,
            sent_at=self.sent_at,
            kind=self.kind,
            service_port=self.service_port,
            corrupted=self.corrupted,
            request_id=self.request_id,
            is_duplicate=self.is_duplicate,
            packet_id=self.packet_id,
            reply_to_address=self.reply_to_address,
        )
        return dup


class FlowEventKind(str, Enum):
    SENT = "sent"
    DELIVERED = "delivered"
    DROPPED = "dropped"
    CORRUPTED = "corrupted"
    DUPLICATED = "duplicated"
    TIMED_OUT = "timed_out"


@dataclass
class FlowEvent:
    """One observable fact about a flow, in simulated time.

    ``first_byte_t``/``last_byte_t`` are set on response completions by the
    request/response workload; ``reason`` distinguishes fault drops from
    unreachable routes.
    """

    kind: FlowEventKind
    flow_id: str
    tenant_id: str
    t: float
    sent_at: float
    packet_id: int = 0
    request_id: str | None = None
    first_byte_t: float | None = None
    last_byte_t: float | None = None
    corrupted: bool = False
    is_duplicate: bool = False
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "flow_id": self.flow_id,
            "tenant_id": self.tenant_id,
            "t": self.t,
            "sent_at": self.sent_at,
            "packet_id": self.packet_id,
            "request_id": self.request_id,
            "first_byte_t": self.first_byte_t,
            "last_byte_t": self.last_byte_t,
            "corrupted": self.corrupted,
            "is_duplicate": self.is_duplicate,
            "reason": self.reason,
        }
