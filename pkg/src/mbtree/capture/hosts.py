from __future__ import annotations

import ipaddress
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .packets import CaptureStats
from .sessions import Session

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class HostTrace:
    """All sessions attributed to one internal endpoint."""

    host_ip: str
    sessions: Tuple[Session, ...]
    capture_duration: float

    def __post_init__(self):
        if self.capture_duration < 0:
            raise ValueError("capture_duration must be >= 0")


def parse_prefixes(prefixes: Optional[Iterable[str]]) -> list:
    if not prefixes:
        return []
    return [ipaddress.ip_network(p.strip(), strict=False) for p in prefixes if p.strip()]


def _is_internal(ip: str, networks) -> bool:
    addr = ipaddress.ip_address(ip)
    return any(addr.version == net.version and addr in net for net in networks)


def host_duration(sessions: Sequence[Session]) -> float:
    if not sessions:
        return 0.0
    return max(s.end_time for s in sessions) - min(s.start_time for s in sessions)


def group_by_host(
    sessions: Iterable[Session],
    internal_prefixes: Optional[Iterable[str]] = None,
    stats: Optional[CaptureStats] = None,
) -> List[HostTrace]:
    """Attribute each session to one internal host, first-seen host order.

    Without prefixes the client (C2S side) is the host. With prefixes the
    client wins when it is internal, otherwise the server; sessions with no
    internal endpoint are skipped and counted.
    """
    if stats is None:
        stats = CaptureStats()
    networks = parse_prefixes(internal_prefixes)
    by_host: Dict[str, List[Session]] = {}
    for s in sessions:
        if not networks or _is_internal(s.client_ip, networks):
            host = s.client_ip
        elif _is_internal(s.server_ip, networks):
            host = s.server_ip
        else:
            stats.unassigned_sessions += 1
            continue
        by_host.setdefault(host, []).append(s)
    if stats.unassigned_sessions:
        log.info("%d session(s) had no internal endpoint", stats.unassigned_sessions)
    return [HostTrace(h, tuple(ss), host_duration(ss)) for h, ss in by_host.items()]
