"""Transport session reassembly and TLS Application Data extraction."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

from .packets import CaptureStats, Protocol, RawPacket, TcpFlags

TLS_CONTENT_TYPES = {20, 21, 22, 23, 24}
TLS_APPLICATION_DATA = 23
TLS_MAX_RECORD = (1 << 14) + 2048
DEFAULT_UDP_TIMEOUT = 300.0


class Direction(str, enum.Enum):
    C2S = "C2S"
    S2C = "S2C"


@dataclass(frozen=True)
class Event:
    direction: Direction
    payload_len: int
    timestamp: float


FiveTuple = Tuple[str, str, int, int, Protocol]


@dataclass(frozen=True)
class Session:
    """A reassembled conversation oriented client (C2S) to server."""

    five_tuple: FiveTuple
    start_time: float
    end_time: float
    events: Tuple[Event, ...] = ()
    tls_detected: bool = False

    @property
    def client_ip(self) -> str:
        return self.five_tuple[0]

    @property
    def server_ip(self) -> str:
        return self.five_tuple[1]

    @property
    def protocol(self) -> Protocol:
        return self.five_tuple[4]

    def signed_sizes(self) -> List[int]:
        return [e.payload_len if e.direction is Direction.C2S else -e.payload_len for e in self.events]


def looks_like_tls(data: bytes) -> bool:
    """True when ``data`` starts with a plausible TLS record header."""
    if len(data) < 5:
        return False
    length = int.from_bytes(data[3:5], "big")
    return data[0] in TLS_CONTENT_TYPES and data[1] == 3 and data[2] <= 4 and 0 < length <= TLS_MAX_RECORD


class TlsRecordStream:
    """Incremental TLS record splitter for one direction of a connection."""

    def __init__(self):
        self.buffer = bytearray()
        self.malformed = False

    def feed(self, data: bytes) -> List[Tuple[int, int]]:
        """Append bytes; return ``(content_type, length)`` for each completed record."""
        self.buffer.extend(data)
        records = []
        while len(self.buffer) >= 5:
            if not looks_like_tls(bytes(self.buffer[:5])):
                self.malformed = True
                self.buffer.clear()
                break
            length = int.from_bytes(self.buffer[3:5], "big")
            if len(self.buffer) < 5 + length:
                break
            records.append((self.buffer[0], length))
            del self.buffer[: 5 + length]
        return records


class _TcpState(enum.Enum):
    SYN_SENT = 1
    SYN_RECEIVED = 2
    ESTABLISHED = 3
    CLOSED = 4
    UNSYNCHRONIZED = 5  # capture started mid-connection


@dataclass
class _Builder:
    client: Tuple[str, int]
    server: Tuple[str, int]
    protocol: Protocol
    start_time: float
    end_time: float
    state: Optional[_TcpState] = None
    client_isn: Optional[int] = None
    raw_events: List[Event] = field(default_factory=list)
    tls_events: List[Event] = field(default_factory=list)
    tls: Optional[bool] = None
    tls_broken: bool = False
    streams: Dict[Direction, TlsRecordStream] = field(default_factory=dict)
    next_seq: Dict[Direction, int] = field(default_factory=dict)
    fin_seen: set = field(default_factory=set)

    def direction_of(self, pkt: RawPacket) -> Direction:
        return Direction.C2S if (pkt.src_ip, pkt.src_port) == self.client else Direction.S2C

    def finish(self, stats: CaptureStats) -> Session:
        events = self.raw_events
        tls = bool(self.tls) and not self.tls_broken
        if self.tls_broken:
            stats.tls_fallbacks += 1
        elif tls:
            events = self.tls_events
        five = (self.client[0], self.server[0], self.client[1], self.server[1], self.protocol)
        return Session(five, self.start_time, self.end_time, tuple(events), tls)


def _key(pkt: RawPacket):
    a = (pkt.src_ip, pkt.src_port)
    b = (pkt.dst_ip, pkt.dst_port)
    return (min(a, b), max(a, b), pkt.protocol)


def _new_seq_bytes(b: _Builder, direction: Direction, pkt: RawPacket, stats: CaptureStats) -> bytes:
    """Trim the already-seen prefix of a TCP segment (retransmitted bytes)."""
    data = pkt.payload
    seq = pkt.tcp_seq or 0
    expected = b.next_seq.get(direction)
    if expected is not None:
        behind = (expected - seq) & 0xFFFFFFFF
        if 0 < behind < 0x80000000:
            if behind >= len(data):
                stats.retransmitted_segments += 1
                return b""
            data = data[behind:]
            seq = expected
    b.next_seq[direction] = (seq + len(data)) & 0xFFFFFFFF
    return data


def _add_payload(b: _Builder, direction: Direction, data: bytes, ts: float, tls_enabled: bool) -> None:
    if not data:
        return
    b.raw_events.append(Event(direction, len(data), ts))
    if not tls_enabled or b.tls_broken:
        return
    if b.tls is None:
        b.tls = looks_like_tls(data)
    if not b.tls:
        return
    stream = b.streams.setdefault(direction, TlsRecordStream())
    for ctype, length in stream.feed(data):
        if ctype == TLS_APPLICATION_DATA and length > 0:
            b.tls_events.append(Event(direction, length, ts))
    if stream.malformed:
        b.tls_broken = True


def _tcp_packet(b: _Builder, pkt: RawPacket, stats: CaptureStats, tls_enabled: bool) -> None:
    direction = b.direction_of(pkt)
    flags = pkt.tcp_flags or TcpFlags(0)
    if b.state is _TcpState.SYN_SENT and direction is Direction.S2C and flags & TcpFlags.SYN and flags & TcpFlags.ACK:
        b.state = _TcpState.SYN_RECEIVED
        b.next_seq[Direction.S2C] = ((pkt.tcp_seq or 0) + 1) & 0xFFFFFFFF
    elif b.state is _TcpState.SYN_RECEIVED and direction is Direction.C2S and flags & TcpFlags.ACK:
        b.state = _TcpState.ESTABLISHED
    if b.state is _TcpState.ESTABLISHED and pkt.payload:
        data = _new_seq_bytes(b, direction, pkt, stats)
        _add_payload(b, direction, data, pkt.timestamp, tls_enabled)
    if flags & TcpFlags.RST:
        b.state = _TcpState.CLOSED
    elif flags & TcpFlags.FIN and b.state is not _TcpState.CLOSED:
        b.fin_seen.add(direction)
        if len(b.fin_seen) == 2:
            b.state = _TcpState.CLOSED


def reassemble_sessions(
    packets: Iterable[RawPacket],
    udp_timeout: float = DEFAULT_UDP_TIMEOUT,
    tls: bool = True,
    stats: Optional[CaptureStats] = None,
) -> List[Session]:
    """Group cleaned packets into bidirectional sessions, in order of first packet.

    TCP sessions start at a SYN (a fresh SYN on a live key starts a new
    conversation) and count payload only once the three-way handshake has
    completed; RST or FIN from both sides closes them. UDP sessions split
    after ``udp_timeout`` seconds of idleness. TLS sessions report one event
    per Application Data record; a malformed record stream falls back to raw
    segment sizes for that session.
    """
    if stats is None:
        stats = CaptureStats()
    order: List[_Builder] = []
    active: Dict[tuple, _Builder] = {}
    for pkt in packets:
        if pkt.protocol is Protocol.OTHER or pkt.is_fragment:
            continue
        key = _key(pkt)
        b = active.get(key)
        sender = (pkt.src_ip, pkt.src_port)
        receiver = (pkt.dst_ip, pkt.dst_port)
        if pkt.protocol is Protocol.TCP:
            flags = pkt.tcp_flags or TcpFlags(0)
            pure_syn = bool(flags & TcpFlags.SYN) and not flags & TcpFlags.ACK
            if pure_syn and b is not None and b.state is _TcpState.SYN_SENT and b.client == sender and b.client_isn == pkt.tcp_seq:
                # retransmitted SYN
                b.end_time = max(b.end_time, pkt.timestamp)
                continue
            if b is None or pure_syn:
                if pure_syn:
                    state, client, server = _TcpState.SYN_SENT, sender, receiver
                elif flags & TcpFlags.SYN:
                    # SYN-ACK without its SYN: the receiver is the client
                    state, client, server = _TcpState.UNSYNCHRONIZED, receiver, sender
                else:
                    state, client, server = _TcpState.UNSYNCHRONIZED, sender, receiver
                b = _Builder(client, server, Protocol.TCP, pkt.timestamp, pkt.timestamp, state=state)
                if pure_syn:
                    b.client_isn = pkt.tcp_seq
                    b.next_seq[Direction.C2S] = ((pkt.tcp_seq or 0) + 1) & 0xFFFFFFFF
                active[key] = b
                order.append(b)
            b.end_time = max(b.end_time, pkt.timestamp)
            _tcp_packet(b, pkt, stats, tls)
        else:
            if b is None or pkt.timestamp - b.end_time > udp_timeout:
                b = _Builder(sender, receiver, Protocol.UDP, pkt.timestamp, pkt.timestamp)
                active[key] = b
                order.append(b)
            b.end_time = max(b.end_time, pkt.timestamp)
            _add_payload(b, b.direction_of(pkt), pkt.payload, pkt.timestamp, tls_enabled=False)
    return [b.finish(stats) for b in order]
