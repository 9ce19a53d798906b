"""Per-packet fault transformers: the five fault types, the four timing
patterns, intensity, protocol filtering, and the three-phase injection window.

Everything here is value-in/value-out apart from ItemInjectionState, which
holds the per-item RNG and token bucket and is owned by exactly one agent.
"""

import hashlib
import random
from dataclasses import dataclass, field

from .errors import EmptyPayload, OutOfWindow, ValidationError
from .packets import Packet, Protocol

FAULT_TYPES = ("loss", "delay", "corruption", "duplication", "rate_limit")
PATTERNS = ("random", "persistent", "bursty", "degradation")

DEFAULT_BURSTY_PERIOD_MS = 1000.0
DEFAULT_BURSTY_DUTY = 0.5


@dataclass(frozen=True)
class ProtocolFilter:
    protocol: Protocol
    service_port: int | None = None

    def to_dict(self) -> dict:
        return {"protocol": self.protocol.value, "service_port": self.service_port}

    @staticmethod
    def from_dict(obj: dict | None) -> "ProtocolFilter | None":
        if obj is None:
            return None
        return ProtocolFilter(Protocol(obj["protocol"]), obj.get("service_port"))


@dataclass(frozen=True)
class Timing:
    pre_ms: float = 0.0
    inject_ms: float = 10_000.0
    post_ms: float = 0.0

    def total_ms(self) -> float:
        return self.pre_ms + self.inject_ms + self.post_ms

    def to_dict(self) -> dict:
        return {"pre_ms": self.pre_ms, "inject_ms": self.inject_ms, "post_ms": self.post_ms}


@dataclass(frozen=True)
class FaultSpec:
    """What/how-hard/when of one injection.

    ``intensity`` is the fraction of matching traffic affected for the
    random and degradation patterns; for persistent and bursty it scales
    magnitude (delay amount, corrupted bytes) instead, never probability.
    """

    fault_type: str
    intensity: float = 1.0
    pattern: str = "persistent"
    # delay
    amount_ms: float = 0.0
    jitter_ms: float = 0.0
    # corruption
    bytes_affected: int = 1
    # rate limit
    rate_pkts_per_s: float = 0.0
    burst_pkts: int | None = None
    # bursty pattern
    period_ms: float = DEFAULT_BURSTY_PERIOD_MS
    duty_fraction: float = DEFAULT_BURSTY_DUTY
    protocol_filter: ProtocolFilter | None = None
    timing: Timing = field(default_factory=Timing)
    seed: int = 0

    def __post_init__(self):
        if self.fault_type not in FAULT_TYPES:
            raise ValidationError(f"unknown fault_type {self.fault_type!r}")
        if self.pattern not in PATTERNS:
            raise ValidationError(f"unknown pattern {self.pattern!r}")
        if not 0.0 <= self.intensity <= 1.0:
            raise ValidationError("intensity must be within [0, 1]")
        if not 0.0 < self.duty_fraction <= 1.0:
            raise ValidationError("duty_fraction must be within (0, 1]")
        if self.period_ms <= 0:
            raise ValidationError("period_ms must be positive")
        if self.jitter_ms > self.amount_ms:
            raise ValidationError("jitter_ms must not exceed amount_ms")
        if self.jitter_ms < 0 or self.amount_ms < 0:
            raise ValidationError("delay amounts must be non-negative")
        if self.bytes_affected < 1:
            raise ValidationError("bytes_affected must be >= 1")
        if self.rate_pkts_per_s < 0:
            raise ValidationError("rate_pkts_per_s must be >= 0")
        if self.timing.pre_ms < 0 or self.timing.post_ms < 0:
            raise ValidationError("pre_ms and post_ms must be >= 0")
        if self.timing.inject_ms <= 0:
            raise ValidationError("inject_ms must be > 0")

    @property
    def effective_burst(self) -> int:
        if self.burst_pkts is not None:
            return max(1, self.burst_pkts)
        return max(1, int(self.rate_pkts_per_s / 10))

    def to_dict(self) -> dict:
        return {
            "fault_type": self.fault_type,
            "intensity": self.intensity,
            "pattern": self.pattern,
            "amount_ms": self.amount_ms,
            "jitter_ms": self.jitter_ms,
            "bytes_affected": self.bytes_affected,
            "rate_pkts_per_s": self.rate_pkts_per_s,
            "burst_pkts": self.burst_pkts,
            "period_ms": self.period_ms,
            "duty_fraction": self.duty_fraction,
            "protocol_filter": self.protocol_filter.to_dict() if self.protocol_filter else None,
            "timing": self.timing.to_dict(),
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(obj: dict) -> "FaultSpec":
        try:
            timing = obj.get("timing") or {}
            return FaultSpec(
                fault_type=obj["fault_type"],
                intensity=float(obj.get("intensity", 1.0)),
                pattern=obj.get("pattern", "persistent"),
                amount_ms=float(obj.get("amount_ms", 0.0)),
                jitter_ms=float(obj.get("jitter_ms", 0.0)),
                bytes_affected=int(obj.get("bytes_affected", 1)),
                rate_pkts_per_s=float(obj.get("rate_pkts_per_s", 0.0)),
                burst_pkts=obj.get("burst_pkts"),
                period_ms=float(obj.get("period_ms", DEFAULT_BURSTY_PERIOD_MS)),
                duty_fraction=float(obj.get("duty_fraction", DEFAULT_BURSTY_DUTY)),
                protocol_filter=ProtocolFilter.from_dict(obj.get("protocol_filter")),
                timing=Timing(
                    pre_ms=float(timing.get("pre_ms", 0.0)),
                    inject_ms=float(timing.get("inject_ms", 10_000.0)),
                    post_ms=float(timing.get("post_ms", 0.0)),
                ),
                seed=int(obj.get("seed", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"bad fault spec: {exc}") from exc


# --- packet outcomes ---

@dataclass(frozen=True)
class Deliver:
    kind = "deliver"


@dataclass(frozen=True)
class Drop:
    kind = "drop"


@dataclass(frozen=True)
class Delay:
    extra_ms: float
    kind = "delay"


@dataclass(frozen=True)
class DeliverCorrupted:
    payload: bytes
    kind = "corrupt"


@dataclass(frozen=True)
class DeliverAndDuplicate:
    copy_delay_ms: float
    kind = "duplicate"


PacketOutcome = Deliver | Drop | Delay | DeliverCorrupted | DeliverAndDuplicate

DELIVER = Deliver()
DROP = Drop()


def activation_probability(
    pattern: str,
    intensity: float,
    t_since_injection_start: float,
    inject_ms: float,
    *,
    period_ms: float = DEFAULT_BURSTY_PERIOD_MS,
    duty_fraction: float = DEFAULT_BURSTY_DUTY,
) -> float:
    """Probability that a matching packet is injected at offset ``t`` into
    the injection window.

    random: constant ``intensity``. persistent: 1 for every packet, the
    case-study reading of "persistent". bursty: square wave, on for
    ``duty_fraction`` of each period. degradation: linear ramp from 0 up to
    ``intensity`` over the window.
    """
    t = t_since_injection_start
    if t < 0 or t >= inject_ms:
        raise OutOfWindow(f"t={t} outside injection window [0, {inject_ms})")
    if pattern == "random":
        return intensity
    if pattern == "persistent":
        return 1.0
    if pattern == "bursty":
        return 1.0 if (t % period_ms) < duty_fraction * period_ms else 0.0
    if pattern == "degradation":
        return intensity * (t / inject_ms)
    raise ValidationError(f"unknown pattern {pattern!r}")


def matches_filter(packet: Packet, protocol_filter: ProtocolFilter | None) -> bool:
    if protocol_filter is None:
        return True
    if packet.protocol != protocol_filter.protocol:
        return False
    if protocol_filter.service_port is not None:
        return packet.service_port == protocol_filter.service_port
    return True


def corrupt_payload(payload: bytes, bytes_affected: int, rng: random.Random) -> bytes:
    """Flip ``min(bytes_affected, len)`` distinct payload bytes, each XORed
    with a non-zero value so the output always differs from the input."""
    if len(payload) == 0:
        raise EmptyPayload("cannot corrupt an empty payload")
    n = min(bytes_affected, len(payload))
    offsets = rng.sample(range(len(payload)), n)
    out = bytearray(payload)
    for off in offsets:
        out[off] ^= rng.randrange(1, 256)
    return bytes(out)


@dataclass
class TokenBucket:
    rate_pkts_per_s: float
    burst_pkts: int
    tokens: float = field(default=0.0)
    last_refill: float = field(default=0.0)

    def __post_init__(self):
        # starts full so the first burst is admitted
        self.tokens = float(self.burst_pkts)

    def admit(self, t: float) -> bool:
        elapsed = max(0.0, t - self.last_refill)
        self.tokens = min(float(self.burst_pkts), self.tokens + self.rate_pkts_per_s * elapsed / 1000.0)
        self.last_refill = t
        if self.tokens >= 1.0:
            self.tokens -= 1.0
            return True
        return False


def rate_admit(bucket: TokenBucket, t: float) -> bool:
    return bucket.admit(t)


def derive_seed(seed: int, *parts: str) -> int:
    """Stable sub-seed derivation (never ``hash()``, which is salted)."""
    h = hashlib.sha256()
    h.update(str(seed).encode())
    for part in parts:
        h.update(b"\x00")
        h.update(part.encode())
    return int.from_bytes(h.digest()[:8], "big")


@dataclass
class ItemInjectionState:
    """Mutable per-item state for one active injection."""

    spec: FaultSpec
    started_at: float
    item_id: str = ""
    rng: random.Random = field(init=False)
    bucket: TokenBucket | None = field(init=False, default=None)
    duplicates_made: int = 0

    def __post_init__(self):
        self.rng = random.Random(derive_seed(self.spec.seed, self.item_id))
        if self.spec.fault_type == "rate_limit":
            self.bucket = TokenBucket(self.spec.rate_pkts_per_s, self.spec.effective_burst)
            self.bucket.last_refill = self.started_at

    def window(self) -> tuple[float, float]:
        return self.started_at, self.started_at + self.spec.timing.inject_ms

    def in_window(self, t: float) -> bool:
        start, end = self.window()
        return start <= t < end


def _magnitude_scale(spec: FaultSpec) -> float:
    # patterns that do not consume intensity as a probability use it to
    # scale magnitude instead
    return spec.intensity if spec.pattern in ("persistent", "bursty") else 1.0


def apply_fault(state: ItemInjectionState, packet: Packet, t: float, hop_latency_ms: float = 0.5) -> PacketOutcome:
    """Decide the fate of one packet crossing the injected item at time ``t``.

    ``t`` is absolute simulated time; outside the injection window the
    packet passes through verbatim.
    """
    spec = state.spec
    if not state.in_window(t):
        return DELIVER
    if not matches_filter(packet, spec.protocol_filter):
        return DELIVER
    t_rel = t - state.started_at
    p = activation_probability(
        spec.pattern, spec.intensity, t_rel, spec.timing.inject_ms,
        period_ms=spec.period_ms, duty_fraction=spec.duty_fraction,
    )

    if spec.fault_type == "rate_limit":
        # rate limiting is deterministic shaping: active whenever the
        # pattern is on, no per-packet probability draw
        if p <= 0.0:
            return DELIVER
        assert state.bucket is not None
        return DELIVER if state.bucket.admit(t) else DROP

    if p <= 0.0 or state.rng.random() >= p:
        return DELIVER

    scale = _magnitude_scale(spec)
    if spec.fault_type == "loss":
        return DROP
    if spec.fault_type == "delay":
        amount = spec.amount_ms * scale
        jitter = spec.jitter_ms * scale
        extra = amount if jitter == 0 else amount + state.rng.uniform(-jitter, jitter)
        return Delay(extra_ms=max(0.0, extra))
    if spec.fault_type == "corruption":
        n = max(1, round(spec.bytes_affected * scale))
        if len(packet.payload) == 0:
            return DELIVER
        return DeliverCorrupted(payload=corrupt_payload(packet.payload, n, state.rng))
    if spec.fault_type == "duplication":
        if packet.is_duplicate:
            return DELIVER  # duplicates are never duplicated again
        state.duplicates_made += 1
        return DeliverAndDuplicate(copy_delay_ms=hop_latency_ms)
    raise ValidationError(f"unknown fault_type {spec.fault_type!r}")
