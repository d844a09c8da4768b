"""IPv4 fragment reassembly with a first-arrival overlap policy."""

from __future__ import annotations

import logging
from typing import Dict, List, Optional, Tuple

from .packets import CaptureStats, RawPacket, decode_transport

log = logging.getLogger(__name__)


class _FragmentGroup:
    __slots__ = ("data", "filled", "total", "first_ts")

    def __init__(self, first_ts: float):
        self.data = bytearray()
        self.filled = bytearray()  # 1 where a byte has arrived
        self.total: Optional[int] = None
        self.first_ts = first_ts

    def add(self, offset: int, chunk: bytes, more: bool) -> int:
        """Insert a fragment, returning the number of conflicting overlapped bytes."""
        end = offset + len(chunk)
        if len(self.data) < end:
            grow = end - len(self.data)
            self.data.extend(b"\0" * grow)
            self.filled.extend(b"\0" * grow)
        conflicts = 0
        for i, byte in enumerate(chunk, start=offset):
            if self.filled[i]:
                if self.data[i] != byte:
                    conflicts += 1
                continue
            self.data[i] = byte
            self.filled[i] = 1
        if not more:
            self.total = end if self.total is None else min(self.total, end)
        return conflicts

    def complete(self) -> bool:
        return self.total is not None and all(self.filled[: self.total])


def reassemble_ip(packets: List[RawPacket], stats: Optional[CaptureStats] = None) -> List[RawPacket]:
    """Merge IPv4 fragments sharing ``(src, dst, id, protocol)``.

    The rebuilt datagram takes the place and timestamp of the fragment that
    completed it. Groups still incomplete at the end of input are dropped
    and counted; overlapping bytes that disagree keep the first arrival.
    """
    if stats is None:
        stats = CaptureStats()
    groups: Dict[Tuple[str, str, int, int], _FragmentGroup] = {}
    out: List[RawPacket] = []
    for pkt in packets:
        if pkt.ip_frag is None:
            out.append(pkt)
            continue
        ident, offset, more = pkt.ip_frag
        key = (pkt.src_ip, pkt.dst_ip, ident, pkt.ip_proto)
        group = groups.get(key)
        if group is None:
            group = groups[key] = _FragmentGroup(pkt.timestamp)
        conflicts = group.add(offset, pkt.payload, more)
        if conflicts:
            stats.fragment_overlaps += 1
        if group.complete():
            del groups[key]
            whole = bytes(group.data[: group.total])
            rebuilt = decode_transport(pkt.timestamp, pkt.src_ip, pkt.dst_ip, pkt.ip_proto, whole)
            if rebuilt is None:
                stats.malformed_packets += 1
                continue
            out.append(rebuilt)
    if groups:
        log.warning("dropping %d incomplete fragment group(s)", len(groups))
        stats.incomplete_fragments += len(groups)
    return out
