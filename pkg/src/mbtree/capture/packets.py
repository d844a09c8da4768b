"""Decoded packet records and the link/network/transport decoders."""

from __future__ import annotations

import enum
import ipaddress
import struct
from dataclasses import dataclass, field
from typing import Optional, Tuple


class Protocol(str, enum.Enum):
    TCP = "TCP"
    UDP = "UDP"
    OTHER = "OTHER"


class TcpFlags(enum.IntFlag):
    FIN = 0x01
    SYN = 0x02
    RST = 0x04
    PSH = 0x08
    ACK = 0x10
    URG = 0x20


IPPROTO_TCP = 6
IPPROTO_UDP = 17

ETH_IPV4 = 0x0800
ETH_IPV6 = 0x86DD
ETH_VLAN = (0x8100, 0x88A8)


@dataclass
class CaptureStats:
    """Counters for everything the capture stage skipped or repaired."""

    truncated_records: int = 0
    non_ip_frames: int = 0
    malformed_packets: int = 0
    incomplete_fragments: int = 0
    fragment_overlaps: int = 0
    retransmitted_segments: int = 0
    tls_fallbacks: int = 0
    unassigned_sessions: int = 0

    def merge(self, other: "CaptureStats") -> None:
        for name in self.__dataclass_fields__:
            setattr(self, name, getattr(self, name) + getattr(other, name))


@dataclass(frozen=True)
class RawPacket:
    """One IP packet as read from a capture file.

    ``ip_frag`` is ``(id, byte_offset, more_fragments)`` for IPv4 fragments;
    a fragment's ``payload`` is the raw IP payload and its ports stay unset
    until :func:`~mbtree.capture.reassembly.reassemble_ip` rebuilds it.
    """

    timestamp: float
    src_ip: str
    dst_ip: str
    protocol: Protocol
    payload: bytes = b""
    src_port: Optional[int] = None
    dst_port: Optional[int] = None
    tcp_flags: Optional[TcpFlags] = None
    tcp_seq: Optional[int] = None
    tcp_ack: Optional[int] = None
    ip_frag: Optional[Tuple[int, int, bool]] = None
    ip_proto: int = field(default=0)

    def __post_init__(self):
        if self.timestamp < 0:
            raise ValueError("timestamp must be non-negative")
        if self.ip_frag is None:
            has_ports = self.src_port is not None and self.dst_port is not None
            if has_ports != (self.protocol in (Protocol.TCP, Protocol.UDP)):
                raise ValueError("ports must be present exactly for TCP/UDP packets")

    @property
    def is_fragment(self) -> bool:
        return self.ip_frag is not None

    def has_flag(self, flag: TcpFlags) -> bool:
        return self.tcp_flags is not None and bool(self.tcp_flags & flag)


def _protocol_for(proto: int) -> Protocol:
    if proto == IPPROTO_TCP:
        return Protocol.TCP
    if proto == IPPROTO_UDP:
        return Protocol.UDP
    return Protocol.OTHER


def decode_transport(timestamp: float, src: str, dst: str, proto: int, data: bytes) -> Optional[RawPacket]:
    """Decode a complete (unfragmented) IP payload; ``None`` if malformed."""
    if proto == IPPROTO_TCP:
        if len(data) < 20:
            return None
        sport, dport, seq, ack, off_flags = struct.unpack("!HHIIH", data[:14])
        header_len = (off_flags >> 12) * 4
        if header_len < 20 or header_len > len(data):
            return None
        return RawPacket(
            timestamp, src, dst, Protocol.TCP, bytes(data[header_len:]),
            src_port=sport, dst_port=dport,
            tcp_flags=TcpFlags(off_flags & 0x3F), tcp_seq=seq, tcp_ack=ack,
            ip_proto=proto,
        )
    if proto == IPPROTO_UDP:
        if len(data) < 8:
            return None
        sport, dport, length = struct.unpack("!HHH", data[:6])
        end = length if 8 <= length <= len(data) else len(data)
        return RawPacket(
            timestamp, src, dst, Protocol.UDP, bytes(data[8:end]),
            src_port=sport, dst_port=dport, ip_proto=proto,
        )
    return RawPacket(timestamp, src, dst, Protocol.OTHER, bytes(data), ip_proto=proto)


def decode_ipv4(timestamp: float, data: bytes) -> Optional[RawPacket]:
    if len(data) < 20 or data[0] >> 4 != 4:
        return None
    ihl = (data[0] & 0x0F) * 4
    total_len, ident, frag = struct.unpack("!HHH", data[2:8])
    if ihl < 20 or total_len < ihl:
        return None
    proto = data[9]
    src = str(ipaddress.IPv4Address(data[12:16]))
    dst = str(ipaddress.IPv4Address(data[16:20]))
    # total_len strips Ethernet trailer padding; snaplen may cut it shorter
    body = data[ihl:min(total_len, len(data))]
    more = bool(frag & 0x2000)
    offset = (frag & 0x1FFF) * 8
    if more or offset:
        return RawPacket(
            timestamp, src, dst, _protocol_for(proto), bytes(body),
            ip_frag=(ident, offset, more), ip_proto=proto,
        )
    return decode_transport(timestamp, src, dst, proto, body)


def decode_ipv6(timestamp: float, data: bytes) -> Optional[RawPacket]:
    if len(data) < 40 or data[0] >> 4 != 6:
        return None
    payload_len = struct.unpack("!H", data[4:6])[0]
    proto = data[6]
    src = str(ipaddress.IPv6Address(data[8:24]))
    dst = str(ipaddress.IPv6Address(data[24:40]))
    body = data[40:40 + payload_len]
    return decode_transport(timestamp, src, dst, proto, body)


def decode_ip(timestamp: float, data: bytes) -> Optional[RawPacket]:
    if not data:
        return None
    version = data[0] >> 4
    if version == 4:
        return decode_ipv4(timestamp, data)
    if version == 6:
        return decode_ipv6(timestamp, data)
    return None


def split_ethernet(frame: bytes) -> Tuple[Optional[int], bytes]:
    """Return ``(ethertype, payload)`` with VLAN tags removed."""
    if len(frame) < 14:
        return None, b""
    ethertype = struct.unpack("!H", frame[12:14])[0]
    pos = 14
    while ethertype in ETH_VLAN and len(frame) >= pos + 4:
        ethertype = struct.unpack("!H", frame[pos + 2:pos + 4])[0]
        pos += 4
    return ethertype, frame[pos:]
