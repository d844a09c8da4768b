"""Capture ingestion: pcap decoding, cleaning, reassembly and host grouping."""

from __future__ import annotations

from typing import Iterable, List, Optional, Set, Union

from .clean import clean_testing, clean_training
from .hosts import HostTrace, group_by_host, parse_prefixes
from .packets import CaptureStats, Protocol, RawPacket, TcpFlags
from .pcap import PcapWriter, read_capture
from .reassembly import reassemble_ip
from .sessions import DEFAULT_UDP_TIMEOUT, Direction, Event, Session, reassemble_sessions


def ingest(
    paths: Union[str, Iterable[str]],
    mode: str = "testing",
    cc_ips: Optional[Set[str]] = None,
    internal_prefixes: Optional[Iterable[str]] = None,
    udp_timeout: float = DEFAULT_UDP_TIMEOUT,
    tls: bool = True,
    stats: Optional[CaptureStats] = None,
) -> List[HostTrace]:
    """Run the whole capture stage on one or more pcap files.

    ``mode="training"`` applies the C&C whitelist (``cc_ips`` required),
    ``mode="testing"`` the blacklist cleaning. Each file is reassembled on
    its own; hosts seen in several files are merged.
    """
    if mode not in ("training", "testing"):
        raise ValueError(f"unknown cleaning mode {mode!r}")
    if isinstance(paths, (str, bytes)) or hasattr(paths, "__fspath__"):
        paths = [paths]
    if stats is None:
        stats = CaptureStats()
    sessions: List[Session] = []
    for path in paths:
        packets = reassemble_ip(read_capture(path, stats), stats)
        if mode == "training":
            packets = clean_training(packets, cc_ips or set())
        else:
            packets = clean_testing(packets)
        sessions.extend(reassemble_sessions(packets, udp_timeout=udp_timeout, tls=tls, stats=stats))
    return group_by_host(sessions, internal_prefixes, stats)


__all__ = [
    "CaptureStats",
    "DEFAULT_UDP_TIMEOUT",
    "Direction",
    "Event",
    "HostTrace",
    "PcapWriter",
    "Protocol",
    "RawPacket",
    "Session",
    "TcpFlags",
    "clean_testing",
    "clean_training",
    "group_by_host",
    "ingest",
    "parse_prefixes",
    "read_capture",
    "reassemble_ip",
    "reassemble_sessions",
]
