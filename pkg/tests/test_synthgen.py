import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mbtree.capture import CaptureStats, ingest, read_capture
from mbtree.dirpiz import extract_head, extract_tail
from mbtree.errors import InputError
from mbtree.synthgen import (
    BENIGN_TEMPLATE, DynamicSlot, TrafficTemplate, gen_host, gen_pcap, head_sequences, load_template,
    lookalike_templates, rat_templates, write_population,
)

L = 10
RAT = TrafficTemplate(
    "rat", handshake=[120, -48, 33, -900, 77, -12, 400], dynamic_slots=[DynamicSlot(3, -1500, -100)],
    sessions=(3, 5), duration_s=(50, 80), body=(0, 4), teardown=[9, -9],
)

VARIANTS = {
    "tcp": (dict(), dict()),
    "tls": (dict(transport="tls"), dict()),
    "udp": (dict(transport="udp"), dict()),
    "fragmented": (dict(), dict(fragment_mtu=576)),
    "retransmission": (dict(), dict(retransmit_every=2)),
    "tls-fragmented-retransmitted": (dict(transport="tls"), dict(fragment_mtu=300, retransmit_every=3)),
}


def round_trip(trace, path, **opts):
    gen_pcap(trace, path, seed=1, **opts)
    hosts = ingest(path)
    assert [h.host_ip for h in hosts] == [trace.host_ip]
    return hosts[0]


@pytest.mark.parametrize("name", list(VARIANTS))
def test_pcap_round_trip(tmp_path, name):
    tmpl_opts, pcap_opts = VARIANTS[name]
    tmpl = TrafficTemplate(**{**RAT.to_dict(), **tmpl_opts, "body": [20, 30]})
    trace = gen_host(tmpl, 5)
    back = round_trip(trace, tmp_path / "t.pcap", **pcap_opts)
    assert [extract_head(s, L) for s in back.sessions] == [extract_head(s, L) for s in trace.sessions]
    assert [extract_tail(s, L) for s in back.sessions] == [extract_tail(s, L) for s in trace.sessions]
    assert [s.signed_sizes() for s in back.sessions] == [s.signed_sizes() for s in trace.sessions]
    assert all(s.tls_detected for s in back.sessions) == (tmpl.transport == "tls")


def test_tls_records_are_application_data_only(tmp_path):
    tmpl = TrafficTemplate(**{**RAT.to_dict(), "transport": "tls"})
    trace = gen_host(tmpl, 2)
    back = round_trip(trace, tmp_path / "tls.pcap")
    raw_payload = sum(len(p.payload) for p in read_capture(tmp_path / "tls.pcap"))
    counted = sum(abs(v) for s in back.sessions for v in s.signed_sizes())
    assert counted < raw_payload  # handshake records and headers excluded
    assert all(s.tls_detected for s in back.sessions)


@pytest.mark.parametrize("transport", ["tcp", "tls"])
def test_large_dynamic_messages_round_trip(tmp_path, transport):
    tmpl = TrafficTemplate(
        "big", handshake=[40, -40, 40], dynamic_slots=[DynamicSlot(1, -9000, -5000)], sessions=(2, 2), transport=transport,
    )
    trace = gen_host(tmpl, 4)
    back = round_trip(trace, tmp_path / "big.pcap", fragment_mtu=1500)
    assert [s.signed_sizes() for s in back.sessions] == [s.signed_sizes() for s in trace.sessions]


def test_empty_trace_gives_header_only_pcap(tmp_path):
    trace = gen_host(TrafficTemplate("none", sessions=(0, 0)), 0)
    path = gen_pcap(trace, tmp_path / "empty.pcap")
    assert path.stat().st_size == 24
    assert ingest(path) == []


def test_no_dynamic_slots_share_one_head():
    tmpl = TrafficTemplate("fixed", handshake=[1, -2, 3, -4, 5, -6, 7, -8, 9, -10], sessions=(6, 6))
    heads = set(head_sequences(gen_host(tmpl, 3), L))
    assert len(heads) == 1


def test_deterministic():
    assert gen_host(RAT, 42) == gen_host(RAT, 42)
    assert gen_host(RAT, 42) != gen_host(RAT, 43)


def test_slot_scope():
    per_session = gen_host(TrafficTemplate(**{**RAT.to_dict(), "sessions": [8, 8]}), 1)
    per_host = gen_host(TrafficTemplate(**{**RAT.to_dict(), "sessions": [8, 8], "slot_scope": "host"}), 1)
    assert len({s.signed_sizes()[3] for s in per_session.sessions}) > 1
    assert len({s.signed_sizes()[3] for s in per_host.sessions}) == 1


@given(st.integers(0, 2 ** 31))
@settings(max_examples=50, deadline=None)
def test_sessions_realise_template(seed):
    trace = gen_host(RAT, seed)
    assert RAT.sessions[0] <= len(trace.sessions) <= RAT.sessions[1]
    for s in trace.sessions:
        sizes = s.signed_sizes()
        for i, v in enumerate(RAT.handshake):
            if i == 3:
                assert -1500 <= sizes[i] <= -100
            else:
                assert sizes[i] == v
        assert tuple(sizes[-2:]) == RAT.teardown
    assert trace.capture_duration <= RAT.duration_s[1]


def test_template_validation():
    with pytest.raises(InputError):
        TrafficTemplate("x", handshake=[0])
    with pytest.raises(InputError):
        TrafficTemplate("x", handshake=[1600])
    with pytest.raises(InputError):
        TrafficTemplate("x", handshake=[1], dynamic_slots=[DynamicSlot(2, 1, 5)])
    with pytest.raises(InputError):
        TrafficTemplate("x", handshake=[1], dynamic_slots=[DynamicSlot(0, 1, 70000)])
    with pytest.raises(InputError):
        TrafficTemplate("x", transport="quic")


def test_template_file_round_trip(tmp_path):
    path = tmp_path / "t.json"
    path.write_text(json.dumps({"label": "q", "handshake": [1, -2], "dynamic_slots": [{"pos": 1, "min": -9, "max": -3}], "sessions": 4, "duration_s": 60}))
    t = load_template(path)
    assert t.sessions == (4, 4) and t.duration_s == (60.0, 60.0)
    assert TrafficTemplate.from_dict(t.to_dict()) == t


def test_write_population(tmp_path):
    rows = write_population([RAT, BENIGN_TEMPLATE], 2, 9, tmp_path)
    assert [r[2] for r in rows] == ["rat", "rat", "benign", "benign"]
    for path, host, _ in rows:
        (trace,) = ingest(path)
        assert trace.host_ip == host


def test_rat_templates_distinct():
    rats = rat_templates()
    assert len(rats) == 7 and len({r.handshake for r in rats}) == 7
    assert all(len(r.dynamic_slots) == 2 for r in rats)


def test_event_count_matches_payload_packets_without_tls(tmp_path):
    trace = gen_host(RAT, 8)
    path = tmp_path / "p.pcap"
    gen_pcap(trace, path, acks=False)
    stats = CaptureStats()
    (host,) = ingest(path, tls=False, stats=stats)
    payload_packets = sum(1 for p in read_capture(path) if p.payload)
    assert sum(len(s.events) for s in host.sessions) == payload_packets


def test_lookalikes_share_only_the_prefix():
    rats = rat_templates(2)
    looks = lookalike_templates(rats, prefix=3)
    assert [t.handshake for t in looks] == [r.handshake[:3] for r in rats]
    assert all(not t.dynamic_slots and t.label.startswith("lookalike-") for t in looks)
