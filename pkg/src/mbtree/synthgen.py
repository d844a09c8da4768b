"""Synthetic host traffic: RAT-like scripted sessions and benign-like noise.

A template describes one kind of host. Every session replays the fixed
``handshake`` (with ``dynamic_slots`` positions redrawn per session),
followed by a random-size ``body`` and the fixed ``teardown``. A template
with an empty handshake and a random body models benign traffic.
"""

from __future__ import annotations

import dataclasses
import ipaddress
import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .capture.hosts import HostTrace, host_duration
from .capture.packets import IPPROTO_TCP, IPPROTO_UDP, Protocol, TcpFlags
from .capture.pcap import PcapWriter
from .capture.sessions import Direction, Event, Session
from .errors import InputError

BASE_TIME = 1_600_000_000.0
MTU = 1500
MSS = 1460
HANDSHAKE_STEP = 0.001
TRANSPORTS = ("tcp", "tls", "udp")
# "session": redraw dynamic sizes per session; "host": once per host,
# modelling packets whose size depends on the victim environment
SLOT_SCOPES = ("session", "host")

Range = Tuple[float, float]


@dataclass(frozen=True)
class DynamicSlot:
    pos: int
    min: int
    max: int


def _as_range(value) -> Tuple:
    if isinstance(value, (list, tuple)):
        lo, hi = value
        return (lo, hi)
    return (value, value)


@dataclass(frozen=True)
class TrafficTemplate:
    label: str
    handshake: Tuple[int, ...] = ()
    dynamic_slots: Tuple[DynamicSlot, ...] = ()
    sessions: Tuple[int, int] = (10, 10)
    duration_s: Range = (600.0, 600.0)
    body: Tuple[int, int] = (0, 0)
    teardown: Tuple[int, ...] = ()
    transport: str = "tcp"
    server_ip: Optional[str] = None
    server_port: int = 443
    gap_s: float = 0.02
    slot_scope: str = "session"

    def __post_init__(self):
        object.__setattr__(self, "handshake", tuple(int(v) for v in self.handshake))
        object.__setattr__(self, "teardown", tuple(int(v) for v in self.teardown))
        object.__setattr__(
            self,
            "dynamic_slots",
            tuple(s if isinstance(s, DynamicSlot) else DynamicSlot(**s) for s in self.dynamic_slots),
        )
        object.__setattr__(self, "sessions", tuple(int(v) for v in _as_range(self.sessions)))
        object.__setattr__(self, "duration_s", tuple(float(v) for v in _as_range(self.duration_s)))
        object.__setattr__(self, "body", tuple(int(v) for v in _as_range(self.body)))
        for v in self.handshake + self.teardown:
            if v == 0 or abs(v) > MTU:
                raise InputError(f"fixed DirPiz {v} must be non-zero and within +-{MTU}")
        for slot in self.dynamic_slots:
            if not 0 <= slot.pos < len(self.handshake):
                raise InputError(f"dynamic slot position {slot.pos} outside the handshake")
            if slot.min > slot.max or max(abs(slot.min), abs(slot.max)) > 65535:
                raise InputError(f"bad dynamic slot range {slot.min}..{slot.max}")
            if slot.min == slot.max == 0:
                raise InputError("dynamic slot range cannot be only padding")
        if self.slot_scope not in SLOT_SCOPES:
            raise InputError(f"slot_scope must be one of {SLOT_SCOPES}")
        if self.transport not in TRANSPORTS:
            raise InputError(f"transport must be one of {TRANSPORTS}")
        if self.sessions[0] < 0 or self.sessions[0] > self.sessions[1]:
            raise InputError(f"bad session count range {self.sessions}")
        if not 0 < self.duration_s[0] <= self.duration_s[1]:
            raise InputError(f"bad duration range {self.duration_s}")

    @classmethod
    def from_dict(cls, data: dict) -> "TrafficTemplate":
        data = dict(data)
        return cls(**data)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "handshake": list(self.handshake),
            "dynamic_slots": [{"pos": s.pos, "min": s.min, "max": s.max} for s in self.dynamic_slots],
            "sessions": list(self.sessions),
            "duration_s": list(self.duration_s),
            "body": list(self.body),
            "teardown": list(self.teardown),
            "transport": self.transport,
            "server_ip": self.server_ip,
            "server_port": self.server_port,
            "gap_s": self.gap_s,
            "slot_scope": self.slot_scope,
        }


def load_template(path: Union[str, Path]) -> TrafficTemplate:
    return TrafficTemplate.from_dict(json.loads(Path(path).read_text()))


def _nonzero(rng: np.random.Generator, lo: int, hi: int) -> int:
    while True:
        v = int(rng.integers(lo, hi + 1))
        if v != 0:
            return v


def draw_slots(template: TrafficTemplate, rng: np.random.Generator) -> List[int]:
    return [_nonzero(rng, slot.min, slot.max) for slot in template.dynamic_slots]


def session_sizes(template: TrafficTemplate, rng: np.random.Generator, slot_values: Optional[Sequence[int]] = None) -> List[int]:
    """Signed payload sizes of one session realised from the template."""
    sizes = list(template.handshake)
    if slot_values is None:
        slot_values = draw_slots(template, rng)
    for slot, value in zip(template.dynamic_slots, slot_values):
        sizes[slot.pos] = value
    n_body = int(rng.integers(template.body[0], template.body[1] + 1))
    for _ in range(n_body):
        sizes.append(_nonzero(rng, -MTU, MTU))
    sizes.extend(template.teardown)
    return sizes


def _label_ip(label: str) -> str:
    return str(ipaddress.IPv4Address("198.18.0.0") + zlib.crc32(label.encode()) % (1 << 17))


def gen_host(template: TrafficTemplate, seed: int, host_ip: Optional[str] = None) -> HostTrace:
    """Deterministically realise one host from a template."""
    rng = np.random.default_rng(seed)
    if host_ip is None:
        host_ip = str(ipaddress.IPv4Address("10.0.0.0") + 1 + int(rng.integers(0, (1 << 24) - 2)))
    protocol = Protocol.UDP if template.transport == "udp" else Protocol.TCP
    tcp = protocol is Protocol.TCP
    n_sessions = int(rng.integers(template.sessions[0], template.sessions[1] + 1))
    duration = float(rng.uniform(*template.duration_s))
    host_slots = draw_slots(template, rng) if template.slot_scope == "host" else None
    plans = [session_sizes(template, rng, host_slots) for _ in range(n_sessions)]
    spans = [(len(p) + 1) * template.gap_s + (6 * HANDSHAKE_STEP if tcp else 0.0) for p in plans]
    starts = sorted(float(x) for x in rng.uniform(0.0, 1.0, n_sessions))
    if starts:
        lo, hi = starts[0], starts[-1]
        room = max(duration - spans[-1], 0.0)
        starts = [room * (s - lo) / (hi - lo) if hi > lo else 0.0 for s in starts]

    sessions = []
    for i, (sizes, start) in enumerate(zip(plans, starts)):
        t0 = BASE_TIME + start
        server_ip = template.server_ip or (
            _label_ip(template.label) if template.handshake else str(ipaddress.IPv4Address("203.0.113.0") + int(rng.integers(1, 255)))
        )
        port = 1024 + (20000 + i) % 60000
        first = t0 + (3 * HANDSHAKE_STEP if tcp else 0.0)
        events = tuple(
            Event(Direction.C2S if v > 0 else Direction.S2C, abs(v), first + k * template.gap_s)
            for k, v in enumerate(sizes)
        )
        last = events[-1].timestamp if events else first
        end = last + (3 * HANDSHAKE_STEP if tcp else 0.0)
        five = (host_ip, server_ip, port, template.server_port, protocol)
        sessions.append(Session(five, t0, end, events, template.transport == "tls"))
    return HostTrace(host_ip, tuple(sessions), host_duration(sessions))


# ---------------------------------------------------------------- pcap emission


def _checksum(header: bytes) -> int:
    total = sum(struct.unpack(f"!{len(header) // 2}H", header))
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return ~total & 0xFFFF


def _mac(ip: str) -> bytes:
    return b"\x02\x00" + ipaddress.IPv4Address(ip).packed


def _ipv4(src: str, dst: str, proto: int, ident: int, body: bytes, frag_off: int = 0, more: bool = False, df: bool = True) -> bytes:
    flags = (0x4000 if df else 0) | (0x2000 if more else 0) | (frag_off // 8)
    header = struct.pack(
        "!BBHHHBBH4s4s", 0x45, 0, 20 + len(body), ident, flags, 64, proto, 0,
        ipaddress.IPv4Address(src).packed, ipaddress.IPv4Address(dst).packed,
    )
    header = header[:10] + struct.pack("!H", _checksum(header)) + header[12:]
    return header + body


def _ether(src: str, dst: str, ip_packet: bytes) -> bytes:
    return _mac(dst) + _mac(src) + struct.pack("!H", 0x0800) + ip_packet


def tcp_segment(sport: int, dport: int, seq: int, ack: int, flags: TcpFlags, payload: bytes = b"") -> bytes:
    return struct.pack("!HHIIHHHH", sport, dport, seq & 0xFFFFFFFF, ack & 0xFFFFFFFF, (5 << 12) | int(flags), 65535, 0, 0) + payload


def udp_datagram(sport: int, dport: int, payload: bytes) -> bytes:
    return struct.pack("!HHHH", sport, dport, 8 + len(payload), 0) + payload


def _filler(n: int) -> bytes:
    # 0xAA is not a TLS content type, so plain payloads never look like TLS
    return b"\xaa" * n


def tls_record(content_type: int, length: int) -> bytes:
    return struct.pack("!BBBH", content_type, 3, 3, length) + _filler(length)


@dataclass
class _Emitter:
    fragment_mtu: Optional[int]
    frames: List[Tuple[float, int, bytes]] = field(default_factory=list)
    ident: int = 1

    def ip(self, ts: float, src: str, dst: str, proto: int, body: bytes) -> None:
        self.ident = (self.ident + 1) & 0xFFFF
        mtu = self.fragment_mtu
        if mtu is None or 20 + len(body) <= mtu:
            self._push(ts, _ether(src, dst, _ipv4(src, dst, proto, self.ident, body)))
            return
        step = (mtu - 20) // 8 * 8
        for off in range(0, len(body), step):
            chunk = body[off:off + step]
            more = off + step < len(body)
            self._push(ts, _ether(src, dst, _ipv4(src, dst, proto, self.ident, chunk, off, more, df=False)))

    def _push(self, ts: float, frame: bytes) -> None:
        self.frames.append((ts, len(self.frames), frame))


def _emit_tcp(em: _Emitter, s: Session, rng: np.random.Generator, retransmit_every: Optional[int], acks: bool) -> None:
    cip, sip, cport, sport, _ = s.five_tuple
    seq = {Direction.C2S: int(rng.integers(0, 1 << 32)), Direction.S2C: int(rng.integers(0, 1 << 32))}
    ends = {Direction.C2S: (cip, sip, cport, sport), Direction.S2C: (sip, cip, sport, cport)}
    other = {Direction.C2S: Direction.S2C, Direction.S2C: Direction.C2S}
    n_data = 0

    def send(ts: float, d: Direction, flags: TcpFlags, payload: bytes = b"", advance: int = 0) -> None:
        src, dst, a, b = ends[d]
        em.ip(ts, src, dst, IPPROTO_TCP, tcp_segment(a, b, seq[d], seq[other[d]], flags, payload))
        seq[d] += advance or len(payload)

    t = s.start_time
    send(t, Direction.C2S, TcpFlags.SYN, advance=1)
    send(t + HANDSHAKE_STEP, Direction.S2C, TcpFlags.SYN | TcpFlags.ACK, advance=1)
    send(t + 2 * HANDSHAKE_STEP, Direction.C2S, TcpFlags.ACK)

    def data(ts: float, d: Direction, payload: bytes) -> None:
        nonlocal n_data
        src, dst, a, b = ends[d]
        segment = tcp_segment(a, b, seq[d], seq[other[d]], TcpFlags.PSH | TcpFlags.ACK, payload)
        em.ip(ts, src, dst, IPPROTO_TCP, segment)
        n_data += 1
        if retransmit_every and n_data % retransmit_every == 0:
            em.ip(ts + HANDSHAKE_STEP / 4, src, dst, IPPROTO_TCP, segment)
        seq[d] += len(payload)
        if acks:
            send(ts + HANDSHAKE_STEP / 2, other[d], TcpFlags.ACK)

    if s.tls_detected:
        # handshake records, several per segment, before any Application Data
        hs = s.start_time + 2.5 * HANDSHAKE_STEP
        data(hs, Direction.C2S, tls_record(22, 212))
        data(hs + HANDSHAKE_STEP / 8, Direction.S2C, tls_record(22, 88) + tls_record(22, 1021) + tls_record(22, 4))
        data(hs + HANDSHAKE_STEP / 4, Direction.C2S, tls_record(22, 70) + tls_record(20, 1) + tls_record(22, 40))
        data(hs + 3 * HANDSHAKE_STEP / 8, Direction.S2C, tls_record(20, 1) + tls_record(22, 40))
        for ev in s.events:
            record = tls_record(23, ev.payload_len)
            for off in range(0, len(record), MSS):
                data(ev.timestamp, ev.direction, record[off:off + MSS])
    else:
        for ev in s.events:
            data(ev.timestamp, ev.direction, _filler(ev.payload_len))

    t = s.end_time - 3 * HANDSHAKE_STEP
    send(t + HANDSHAKE_STEP, Direction.C2S, TcpFlags.FIN | TcpFlags.ACK, advance=1)
    send(t + 2 * HANDSHAKE_STEP, Direction.S2C, TcpFlags.FIN | TcpFlags.ACK, advance=1)
    send(t + 3 * HANDSHAKE_STEP, Direction.C2S, TcpFlags.ACK)


def _emit_udp(em: _Emitter, s: Session) -> None:
    cip, sip, cport, sport, _ = s.five_tuple
    for ev in s.events:
        if ev.direction is Direction.C2S:
            em.ip(ev.timestamp, cip, sip, IPPROTO_UDP, udp_datagram(cport, sport, _filler(ev.payload_len)))
        else:
            em.ip(ev.timestamp, sip, cip, IPPROTO_UDP, udp_datagram(sport, cport, _filler(ev.payload_len)))


def gen_pcap(
    trace: HostTrace,
    path: Union[str, Path],
    seed: int = 0,
    fragment_mtu: Optional[int] = None,
    retransmit_every: Optional[int] = None,
    acks: bool = True,
) -> Path:
    """Write a host's sessions as an Ethernet/IPv4 classic pcap file.

    TCP sessions get a full handshake and teardown; TLS sessions carry
    handshake records followed by one Application Data record per event.
    ``fragment_mtu`` splits larger IP datagrams into fragments and
    ``retransmit_every=k`` duplicates every k-th data segment.
    """
    rng = np.random.default_rng(seed)
    em = _Emitter(fragment_mtu)
    for s in trace.sessions:
        for ev in s.events:
            limit = 65535 - 28 if s.protocol is Protocol.UDP else 65535 - 40 - (5 if s.tls_detected else 0)
            if ev.payload_len > limit:
                raise InputError(f"event of {ev.payload_len} bytes does not fit one IPv4 datagram")
        if s.protocol is Protocol.UDP:
            _emit_udp(em, s)
        else:
            _emit_tcp(em, s, rng, retransmit_every, acks)
    em.frames.sort(key=lambda f: (f[0], f[1]))
    path = Path(path)
    with PcapWriter(path) as w:
        for ts, _, frame in em.frames:
            w.write(ts, frame)
    return path


def head_sequences(trace: HostTrace, L: int) -> List[Tuple[int, ...]]:
    """Zero-padded first-``L`` signed sizes per session, straight from the trace."""
    return [tuple((s.signed_sizes()[:L] + [0] * L)[:L]) for s in trace.sessions]


def write_population(
    templates: Sequence[TrafficTemplate], hosts: int, seed: int, out_dir: Union[str, Path], **pcap_options
) -> List[Tuple[Path, str, str]]:
    """Generate ``hosts`` hosts per template; returns ``(pcap, host_ip, label)`` rows."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    seeds = np.random.SeedSequence(seed).spawn(len(templates) * hosts)
    for t_idx, template in enumerate(templates):
        for h in range(hosts):
            host_seed = int(seeds[t_idx * hosts + h].generate_state(1)[0])
            trace = gen_host(template, host_seed)
            path = out_dir / f"{template.label}_{h:03d}.pcap"
            gen_pcap(trace, path, seed=host_seed, **pcap_options)
            rows.append((path, trace.host_ip, template.label))
    return rows


BENIGN_TEMPLATE = TrafficTemplate("benign", sessions=(5, 30), duration_s=(300, 1200), body=(2, 30))


def rat_templates(count: int = 7, seed: int = 7, slot_scope: str = "host") -> List[TrafficTemplate]:
    """RAT-like families: a 12-message fixed handshake with two dynamic slots
    (one per direction), a random body and a two-message teardown."""
    rng = np.random.default_rng(seed)
    sign = np.where(np.arange(12) % 2 == 0, 1, -1)
    out = []
    for k in range(count):
        handshake = [int(v) for v in rng.integers(20, 600, 12) * sign]
        teardown = [int(rng.integers(20, 90)), -int(rng.integers(20, 90))]
        out.append(
            TrafficTemplate(
                f"rat{k}",
                handshake=handshake,
                dynamic_slots=[DynamicSlot(3, -1500, -100), DynamicSlot(6, 100, 1500)],
                sessions=(8, 14),
                duration_s=(500, 700),
                body=(3, 12),
                teardown=teardown,
                slot_scope=slot_scope,
            )
        )
    return out


def lookalike_templates(rats: Sequence[TrafficTemplate], prefix: int = 3) -> List[TrafficTemplate]:
    """Benign hosts whose sessions open like a RAT family (a shared client
    library, say) and then carry ordinary traffic."""
    return [
        dataclasses.replace(
            BENIGN_TEMPLATE, label=f"lookalike-{r.label}", handshake=r.handshake[:prefix], server_ip="203.0.113.50"
        )
        for r in rats
    ]
