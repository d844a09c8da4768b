import pytest
from hypothesis import given
from hypothesis import strategies as st

from mbtree.capture import Direction, Event, Protocol, Session
from mbtree.dirpiz import DirPizSeq, apply_stoplist, extract_head, extract_tail, load_stoplist, pad, session_sequences
from mbtree.errors import InputError


def make_session(signed):
    events = tuple(Event(Direction.C2S if v > 0 else Direction.S2C, abs(v), float(i)) for i, v in enumerate(signed))
    return Session(("10.0.0.1", "10.0.0.2", 1000, 443, Protocol.TCP), 0.0, float(len(signed)), events)


def test_head_sign_convention():
    assert extract_head(make_session([100, -200]), 4).values == (100, -200, 0, 0)


def test_head_empty_and_truncation():
    assert extract_head(make_session([]), 4).values == (0, 0, 0, 0)
    assert extract_head(make_session([1, -2, 3, -4, 5, -6]), 4).values == (1, -2, 3, -4)


def test_tail_reversed():
    assert extract_tail(make_session([10, -20, 30, -40, 50]), 3).values == (50, -40, 30)
    assert extract_tail(make_session([7]), 2).values == (7, 0)
    assert extract_tail(make_session([]), 3).values == (0, 0, 0)


def test_stoplist():
    seq = pad([100, -200, 100], 4)
    assert apply_stoplist(seq, {100}).values == (-200, 0, 0, 0)
    assert apply_stoplist(seq, frozenset()) == seq
    assert apply_stoplist(seq, {100, -200}).values == (0, 0, 0, 0)


def test_padding_must_be_a_suffix():
    with pytest.raises(InputError):
        DirPizSeq((1, 0, 2))
    with pytest.raises(InputError):
        DirPizSeq((70000,))


def test_load_stoplist(tmp_path):
    p = tmp_path / "stop.txt"
    p.write_text("# common sizes\n100\n-200  # ack\n\n")
    assert load_stoplist(p) == {100, -200}


def test_session_sequences_applies_stoplist_to_both():
    heads, tails = session_sequences([make_session([5, -6, 7])], 3, {-6})
    assert heads[0].values == (5, 7, 0)
    assert tails[0].values == (7, 5, 0)


signed = st.lists(st.integers(-1500, 1500).filter(bool), max_size=25)


@given(signed, st.integers(1, 20))
def test_head_is_padded_prefix(values, L):
    head = extract_head(make_session(values), L).values
    assert len(head) == L
    k = min(L, len(values))
    assert head[:k] == tuple(values[:k]) and set(head[k:]) <= {0}


@given(signed, st.integers(1, 20))
def test_tail_is_reversed_suffix(values, L):
    tail = extract_tail(make_session(values), L).values
    k = min(L, len(values))
    assert tail[:k] == tuple(reversed(values))[:k]


@given(signed, st.integers(1, 20), st.sets(st.integers(-1500, 1500)))
def test_stoplist_idempotent_and_clean(values, L, stop):
    once = apply_stoplist(extract_head(make_session(values), L), stop)
    assert apply_stoplist(once, stop) == once
    assert not (set(once.values) - {0}) & stop
