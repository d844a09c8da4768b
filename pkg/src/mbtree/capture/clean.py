"""Training whitelist and testing blacklist cleaning strategies."""

from __future__ import annotations

import ipaddress
from typing import Iterable, List, Set

from ..errors import ConfigurationError
from .packets import Protocol, RawPacket, TcpFlags

SESSION_FLAGS = TcpFlags.SYN | TcpFlags.FIN | TcpFlags.RST


def clean_training(packets: Iterable[RawPacket], cc_ips: Set[str]) -> List[RawPacket]:
    """Keep only packets with a C&C address on either end."""
    if not cc_ips:
        raise ConfigurationError("training cleaning needs at least one C&C IP")
    cc = {str(ipaddress.ip_address(ip)) for ip in cc_ips}
    return [p for p in packets if p.src_ip in cc or p.dst_ip in cc]


def is_loop(pkt: RawPacket) -> bool:
    if pkt.src_ip == pkt.dst_ip:
        return True
    return ipaddress.ip_address(pkt.src_ip).is_loopback or ipaddress.ip_address(pkt.dst_ip).is_loopback


def is_non_transmission(pkt: RawPacket) -> bool:
    if pkt.is_fragment:
        return False
    if pkt.protocol is Protocol.OTHER:
        return True
    if pkt.payload:
        return False
    # empty TCP segment survives only if it delimits a session
    return not (pkt.protocol is Protocol.TCP and pkt.has_flag(SESSION_FLAGS))


def _repeat_key(pkt: RawPacket):
    flags = pkt.tcp_flags & SESSION_FLAGS if pkt.tcp_flags is not None else 0
    return (pkt.src_ip, pkt.dst_ip, pkt.src_port, pkt.dst_port, int(flags), pkt.tcp_seq, pkt.payload)


def clean_testing(packets: Iterable[RawPacket]) -> List[RawPacket]:
    """Drop loop packets, non-transmission packets and TCP retransmissions.

    A retransmission is a TCP packet matching an earlier survivor on
    direction, ports, sequence number, session flags and payload bytes.
    """
    seen = set()
    kept: List[RawPacket] = []
    for pkt in packets:
        if is_loop(pkt) or is_non_transmission(pkt):
            continue
        if pkt.protocol is Protocol.TCP and not pkt.is_fragment:
            key = _repeat_key(pkt)
            if key in seen:
                continue
            seen.add(key)
        kept.append(pkt)
    return kept
