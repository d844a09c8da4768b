import json

import jsonschema
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mbtree.capture import HostTrace
from mbtree.errors import InputError
from mbtree.mltree import (
    SIGNATURE_SET_SCHEMA, MLTree, Signature, add_to_set, build, build_signature, dump_signatures,
    load_signatures, merge, merge_signatures, save_signatures,
)
from test_dirpiz import make_session


def reference_build(seqs, L):
    """Independent tally: count every (level, prefix-tail) pair directly."""
    nodes = [dict() for _ in range(L)]
    edges = [dict() for _ in range(L)]
    for seq in seqs:
        stop = next((i for i, v in enumerate(seq) if v == 0), L)
        for l in range(stop):
            nodes[l][seq[l]] = nodes[l].get(seq[l], 0) + 1
            key = (seq[l - 1] if l else 0, seq[l])
            edges[l][key] = edges[l].get(key, 0) + 1
    return nodes, edges


def test_hand_traced_two_sequences():
    t = build([[10, -20], [10, -30]], 2)
    assert t.nodes == ({10: 2}, {-20: 1, -30: 1})
    assert t.edges == ({(0, 10): 2}, {(10, -20): 1, (10, -30): 1})


def test_empty_and_padding_stop():
    assert build([], 3) == MLTree.empty(3)
    t = build([[5, 0]], 2)
    assert t.nodes == ({5: 1}, {}) and t.edges == ({(0, 5): 1}, {})
    assert t.depth() == 1


def test_length_mismatch():
    with pytest.raises(InputError):
        build([[1, 2, 3]], 2)


def test_merge_identity_and_equivalence():
    t = build([[10, -20]], 2)
    assert merge([t]) == t
    assert merge([build([[10, -20]], 2), build([[10, -30]], 2)]) == build([[10, -20], [10, -30]], 2)
    assert merge([]).is_empty()
    with pytest.raises(InputError):
        merge([build([], 2), build([], 3)])


def _seqs(L):
    value = st.sampled_from([-3, -2, -1, 1, 2, 3, 4])
    return st.lists(st.lists(value, min_size=0, max_size=L).map(lambda v: v + [0] * (L - len(v))), max_size=15)


@given(st.integers(1, 6).flatmap(lambda L: st.tuples(st.just(L), _seqs(L))))
def test_build_matches_reference_tally(case):
    L, seqs = case
    nodes, edges = reference_build(seqs, L)
    t = build(seqs, L)
    assert list(t.nodes) == nodes and list(t.edges) == edges


@given(st.integers(1, 6).flatmap(lambda L: st.tuples(st.just(L), _seqs(L), _seqs(L))))
def test_build_of_union_is_merge(case):
    L, a, b = case
    assert build(a + b, L) == merge([build(a, L), build(b, L)])


@given(st.integers(1, 6).flatmap(lambda L: st.tuples(st.just(L), _seqs(L))))
def test_edge_count_conservation(case):
    L, seqs = case
    t = build(seqs, L)
    for l in range(L):
        assert t.node_total(l) == t.edge_total(l)
        for v, c in t.nodes[l].items():
            assert sum(n for (_, ch), n in t.edges[l].items() if ch == v) == c


def _trace(*sessions, duration=None):
    ss = tuple(make_session(s) for s in sessions)
    return HostTrace("10.0.0.1", ss, max((s.end_time for s in ss), default=0.0) if duration is None else duration)


def test_single_session_signature():
    sig = build_signature(_trace([5, -6, 7]), "rat", 3)
    assert sig.head == build([[5, -6, 7]], 3)
    assert sig.tail == build([[7, -6, 5]], 3)


def test_zero_duration_floored():
    assert build_signature(_trace([5], duration=0.0), "rat", 2).duration == 1.0


def test_two_sessions_equal_merge_of_each():
    both = build_signature(_trace([1, -2], [3, -4, 5]), "rat", 3)
    parts = merge_signatures([build_signature(_trace([1, -2]), "rat", 3), build_signature(_trace([3, -4, 5]), "rat", 3)])
    assert (both.head, both.tail) == (parts.head, parts.tail)


def test_merge_sums_durations_and_add_to_set():
    a = build_signature(_trace([1], duration=10.0), "x", 2)
    b = build_signature(_trace([2], duration=5.0), "x", 2)
    c = build_signature(_trace([3], duration=5.0), "y", 2)
    sigs = add_to_set(add_to_set(add_to_set([], a), c), b)
    assert [s.label for s in sigs] == ["x", "y"]
    assert sigs[0].duration == 15.0
    assert sigs[0].head == merge([a.head, b.head])


def test_signature_validation():
    with pytest.raises(InputError):
        Signature("x", build([], 2), build([], 3), 1.0)
    with pytest.raises(InputError):
        Signature("x", build([], 2), build([], 2), 0.0)


def test_signature_file_round_trip_and_schema(tmp_path):
    sigs = [build_signature(_trace([5, -6, 7], [5, -8]), "quasar", 3), build_signature(_trace([9]), "njrat", 3)]
    path = tmp_path / "sig.json"
    save_signatures(sigs, path, 3)
    doc = json.loads(path.read_text())
    jsonschema.validate(doc, SIGNATURE_SET_SCHEMA)
    L, back = load_signatures(path)
    assert L == 3
    assert [(s.label, s.head, s.tail, s.duration) for s in back] == [(s.label, s.head, s.tail, s.duration) for s in sigs]
    assert dump_signatures(back, 3) == dump_signatures(sigs, 3)


def test_load_rejects_bad_document(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"version": 1, "L": 2, "signatures": [{"label": "x"}]}))
    with pytest.raises(InputError):
        load_signatures(path)


@given(st.integers(1, 5).flatmap(lambda L: st.tuples(st.just(L), _seqs(L))))
@settings(max_examples=50)
def test_tree_dict_round_trip(case):
    L, seqs = case
    t = build(seqs, L)
    assert MLTree.from_dict(json.loads(json.dumps(t.to_dict())), L) == t
