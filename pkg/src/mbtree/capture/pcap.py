"""Classic pcap container reading and writing.

https://wiki.wireshark.org/Development/LibpcapFileFormat
Global Header | Record Header | Packet Data | Record Header | Packet Data | ...
"""

from __future__ import annotations

import logging
import os
import struct
from typing import BinaryIO, Iterator, List, Optional, Tuple, Union

from ..errors import PcapFormatError
from .packets import ETH_IPV4, ETH_IPV6, CaptureStats, RawPacket, decode_ip, decode_ipv4, decode_ipv6, split_ethernet

log = logging.getLogger(__name__)

MAGIC_USEC = 0xA1B2C3D4
MAGIC_NSEC = 0xA1B23C4D

LINKTYPE_ETHERNET = 1
LINKTYPE_RAW = 101
LINKTYPE_RAW_DLT = 12  # DLT_RAW as written by some libpcap builds
LINKTYPE_LINUX_SLL = 113
LINKTYPE_IPV4 = 228
LINKTYPE_IPV6 = 229

GLOBAL_HEADER_LEN = 24
RECORD_HEADER_LEN = 16

PathLike = Union[str, os.PathLike]


def _parse_global_header(data: bytes) -> Tuple[str, float, int]:
    if len(data) < GLOBAL_HEADER_LEN:
        raise PcapFormatError("file too short for a pcap global header")
    for endian in ("<", ">"):
        magic = struct.unpack(endian + "I", data[:4])[0]
        if magic in (MAGIC_USEC, MAGIC_NSEC):
            break
    else:
        raise PcapFormatError(f"bad pcap magic number 0x{data[:4].hex()}")
    resolution = 1e-6 if magic == MAGIC_USEC else 1e-9
    linktype = struct.unpack(endian + "I", data[20:24])[0] & 0x0FFFFFFF
    return endian, resolution, linktype


def iter_records(fp: BinaryIO, stats: Optional[CaptureStats] = None) -> Tuple[int, Iterator[Tuple[float, bytes]]]:
    """Parse the global header; return the link type and a ``(timestamp, frame)`` iterator."""
    endian, resolution, linktype = _parse_global_header(fp.read(GLOBAL_HEADER_LEN))
    hdr_fmt = endian + "IIII"

    def records() -> Iterator[Tuple[float, bytes]]:
        while True:
            hdr = fp.read(RECORD_HEADER_LEN)
            if not hdr:
                return
            if len(hdr) < RECORD_HEADER_LEN:
                _truncated(stats)
                return
            ts_sec, ts_frac, incl_len, _orig_len = struct.unpack(hdr_fmt, hdr)
            frame = fp.read(incl_len)
            if len(frame) < incl_len:
                _truncated(stats)
                return
            yield ts_sec + ts_frac * resolution, frame

    return linktype, records()


def _truncated(stats: Optional[CaptureStats]) -> None:
    log.warning("truncated trailing pcap record skipped")
    if stats is not None:
        stats.truncated_records += 1


def _decode_frame(linktype: int, ts: float, frame: bytes) -> Optional[RawPacket]:
    if linktype == LINKTYPE_ETHERNET:
        ethertype, body = split_ethernet(frame)
        if ethertype == ETH_IPV4:
            return decode_ipv4(ts, body)
        if ethertype == ETH_IPV6:
            return decode_ipv6(ts, body)
        return None
    if linktype == LINKTYPE_LINUX_SLL:
        if len(frame) < 16:
            return None
        ethertype = struct.unpack("!H", frame[14:16])[0]
        if ethertype not in (ETH_IPV4, ETH_IPV6):
            return None
        return decode_ip(ts, frame[16:])
    # LINKTYPE_RAW / IPV4 / IPV6
    return decode_ip(ts, frame)


def read_capture(path: PathLike, stats: Optional[CaptureStats] = None) -> List[RawPacket]:
    """Decode every IP packet of a classic pcap file, in file order.

    Non-IP frames are skipped; a truncated trailing record is dropped and
    counted in ``stats.truncated_records``.
    """
    if stats is None:
        stats = CaptureStats()
    packets: List[RawPacket] = []
    with open(path, "rb") as fp:
        linktype, records = iter_records(fp, stats)
        if linktype not in (LINKTYPE_ETHERNET, LINKTYPE_RAW, LINKTYPE_RAW_DLT, LINKTYPE_LINUX_SLL, LINKTYPE_IPV4, LINKTYPE_IPV6):
            raise PcapFormatError(f"unsupported pcap link type {linktype}")
        for ts, frame in records:
            pkt = _decode_frame(linktype, ts, frame)
            if pkt is None:
                stats.non_ip_frames += 1
                continue
            packets.append(pkt)
    return packets


class PcapWriter:
    """Minimal little-endian, microsecond-resolution pcap writer."""

    def __init__(self, path: PathLike, linktype: int = LINKTYPE_ETHERNET, snaplen: int = 262144):
        self._fp = open(path, "wb")
        self._fp.write(struct.pack("<IHHiIII", MAGIC_USEC, 2, 4, 0, 0, snaplen, linktype))

    def write(self, timestamp: float, frame: bytes) -> None:
        sec = int(timestamp)
        usec = int(round((timestamp - sec) * 1e6))
        if usec >= 1_000_000:
            sec, usec = sec + 1, usec - 1_000_000
        self._fp.write(struct.pack("<IIII", sec, usec, len(frame), len(frame)))
        self._fp.write(frame)

    def close(self) -> None:
        self._fp.close()

    def __enter__(self) -> "PcapWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
