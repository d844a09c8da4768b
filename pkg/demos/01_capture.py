"""Capture stage: write a synthetic TLS host to pcap, then read it back.

The capture is fragmented at a small MTU and has duplicated segments, so
the reader has to rebuild IP datagrams, drop retransmitted bytes and keep
only TLS Application Data records.
"""

import tempfile
from pathlib import Path

from mbtree.capture import CaptureStats, ingest
from mbtree.synthgen import DynamicSlot, TrafficTemplate, gen_host, gen_pcap

template = TrafficTemplate(
    "demo-rat",
    handshake=[215, -48, 33, -900, 77, -12],
    dynamic_slots=[DynamicSlot(3, -1500, -100)],
    sessions=(3, 3),
    body=(2, 4),
    teardown=[9, -9],
    transport="tls",
)
trace = gen_host(template, seed=1)

with tempfile.TemporaryDirectory() as tmp:
    path = gen_pcap(trace, Path(tmp) / "host.pcap", fragment_mtu=400, retransmit_every=3)
    stats = CaptureStats()
    (host,) = ingest(path, stats=stats)

print(f"host {host.host_ip}: {len(host.sessions)} sessions over {host.capture_duration:.1f} s")
for s in host.sessions:
    print(f"  {s.five_tuple[0]}:{s.five_tuple[2]} -> {s.five_tuple[1]}:{s.five_tuple[3]} tls={s.tls_detected}")
    print(f"    signed sizes {s.signed_sizes()}")
print("counters:", stats)
print("identical to the generated trace:", [s.signed_sizes() for s in host.sessions] == [s.signed_sizes() for s in trace.sessions])
