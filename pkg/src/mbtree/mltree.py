"""Multi-level trees (MLTree) and host signatures.

An MLTree keeps, for every level ``l`` of a set of aligned DirPiz
sequences, how often each value occurs (nodes) and how often each pair of
adjacent values ``(seq[l-1], seq[l])`` occurs (edges). Level-0 edges hang
off a virtual root ``0``. Padding never becomes a node.
"""

from __future__ import annotations

import json
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import AbstractSet, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from . import __version__
from .capture.hosts import HostTrace
from .dirpiz import session_sequences
from .errors import InputError

SIGNATURE_FORMAT_VERSION = 1
ROOT = 0

Edge = Tuple[int, int]


@dataclass(frozen=True)
class MLTree:
    """Level-indexed weighted DAG. Treat the count maps as read-only."""

    L: int
    nodes: Tuple[Dict[int, int], ...]
    edges: Tuple[Dict[Edge, int], ...]

    @classmethod
    def empty(cls, L: int) -> "MLTree":
        return cls(L, tuple({} for _ in range(L)), tuple({} for _ in range(L)))

    def depth(self) -> int:
        """Number of leading non-empty levels."""
        for l, level in enumerate(self.nodes):
            if not level:
                return l
        return self.L

    def is_empty(self) -> bool:
        return not any(self.nodes)

    def node_total(self, level: int) -> int:
        return sum(self.nodes[level].values())

    def edge_total(self, level: int) -> int:
        return sum(self.edges[level].values())

    def to_dict(self) -> dict:
        return {
            "levels": [
                {
                    "nodes": [[n, c] for n, c in sorted(self.nodes[l].items())],
                    "edges": [[p, ch, c] for (p, ch), c in sorted(self.edges[l].items())],
                }
                for l in range(self.L)
            ]
        }

    @classmethod
    def from_dict(cls, data: dict, L: int) -> "MLTree":
        levels = data["levels"]
        if len(levels) != L:
            raise InputError(f"tree has {len(levels)} levels, expected {L}")
        nodes = tuple({int(n): int(c) for n, c in lv["nodes"]} for lv in levels)
        edges = tuple({(int(p), int(ch)): int(c) for p, ch, c in lv["edges"]} for lv in levels)
        return cls(L, nodes, edges)


def build(seqs: Iterable[Sequence[int]], L: int) -> MLTree:
    """Initialise an MLTree from aligned sequences of length ``L``.

    A zero at level ``l`` ends that sequence's contribution.
    """
    nodes = [Counter() for _ in range(L)]
    edges = [Counter() for _ in range(L)]
    for seq in seqs:
        values = tuple(seq)
        if len(values) != L:
            raise InputError(f"sequence of length {len(values)} given for L={L}")
        parent = ROOT
        for l, v in enumerate(values):
            if v == 0:
                break
            nodes[l][v] += 1
            edges[l][(parent, v)] += 1
            parent = v
    return MLTree(L, tuple(dict(c) for c in nodes), tuple(dict(c) for c in edges))


def merge(trees: Iterable[MLTree], L: Optional[int] = None) -> MLTree:
    """Sum node and edge counts level by level.

    Only trees derived from the same malicious sample should be merged.
    """
    trees = list(trees)
    if not trees:
        return MLTree.empty(L or 0)
    L = trees[0].L if L is None else L
    if any(t.L != L for t in trees):
        raise InputError("cannot merge MLTrees with different max levels")
    nodes = [Counter() for _ in range(L)]
    edges = [Counter() for _ in range(L)]
    for t in trees:
        for l in range(L):
            nodes[l].update(t.nodes[l])
            edges[l].update(t.edges[l])
    return MLTree(L, tuple(dict(c) for c in nodes), tuple(dict(c) for c in edges))


@dataclass(frozen=True)
class Signature:
    """Head and tail MLTrees of one sample plus its capture duration (seconds)."""

    label: str
    head: MLTree
    tail: MLTree
    duration: float
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.head.L != self.tail.L:
            raise InputError("head and tail trees must share L")
        if not self.duration > 0:
            raise InputError("signature duration must be positive")

    @property
    def L(self) -> int:
        return self.head.L

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "duration": self.duration,
            "head": self.head.to_dict(),
            "tail": self.tail.to_dict(),
            "meta": dict(self.meta),
        }

    @classmethod
    def from_dict(cls, data: dict, L: int) -> "Signature":
        return cls(
            str(data["label"]),
            MLTree.from_dict(data["head"], L),
            MLTree.from_dict(data["tail"], L),
            float(data["duration"]),
            dict(data.get("meta", {})),
        )


def build_signature(
    trace: HostTrace, label: str, L: int, stoplist: AbstractSet[int] = frozenset()
) -> Signature:
    if not trace.sessions:
        raise InputError(f"host {trace.host_ip} has no sessions")
    heads, tails = session_sequences(trace.sessions, L, stoplist)
    return Signature(
        label,
        build(heads, L),
        build(tails, L),
        max(trace.capture_duration, 1.0),
        {"created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()), "version": __version__},
    )


def merge_signatures(sigs: Sequence[Signature], label: Optional[str] = None) -> Signature:
    """Merge same-sample signatures; durations add up with the counts."""
    if not sigs:
        raise InputError("nothing to merge")
    return Signature(
        label or sigs[0].label,
        merge([s.head for s in sigs]),
        merge([s.tail for s in sigs]),
        sum(s.duration for s in sigs),
        dict(sigs[0].meta),
    )


def add_to_set(existing: List[Signature], new: Signature) -> List[Signature]:
    """Append ``new`` to a signature list, merging into a same-label entry."""
    out = list(existing)
    for i, sig in enumerate(out):
        if sig.label == new.label:
            out[i] = merge_signatures([sig, new])
            return out
    out.append(new)
    return out


SIGNATURE_SET_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["version", "L", "signatures"],
    "properties": {
        "version": {"const": SIGNATURE_FORMAT_VERSION},
        "L": {"type": "integer", "minimum": 1},
        "signatures": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["label", "duration", "head", "tail"],
                "properties": {
                    "label": {"type": "string"},
                    "duration": {"type": "number", "exclusiveMinimum": 0},
                    "head": {"$ref": "#/$defs/tree"},
                    "tail": {"$ref": "#/$defs/tree"},
                    "meta": {"type": "object"},
                },
            },
        },
    },
    "$defs": {
        "tree": {
            "type": "object",
            "required": ["levels"],
            "properties": {
                "levels": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["nodes", "edges"],
                        "properties": {
                            "nodes": {
                                "type": "array",
                                "items": {
                                    "type": "array",
                                    "prefixItems": [{"type": "integer"}, {"type": "integer", "minimum": 1}],
                                    "minItems": 2,
                                    "maxItems": 2,
                                },
                            },
                            "edges": {
                                "type": "array",
                                "items": {
                                    "type": "array",
                                    "prefixItems": [
                                        {"type": "integer"},
                                        {"type": "integer"},
                                        {"type": "integer", "minimum": 1},
                                    ],
                                    "minItems": 3,
                                    "maxItems": 3,
                                },
                            },
                        },
                    },
                }
            },
        }
    },
}


def dump_signatures(sigs: Sequence[Signature], L: int) -> str:
    if any(s.L != L for s in sigs):
        raise InputError("all signatures in a set must share L")
    doc = {"version": SIGNATURE_FORMAT_VERSION, "L": L, "signatures": [s.to_dict() for s in sigs]}
    return json.dumps(doc, sort_keys=True, indent=1)


def save_signatures(sigs: Sequence[Signature], path: Union[str, Path], L: int) -> None:
    Path(path).write_text(dump_signatures(sigs, L) + "\n")


def parse_signatures(doc: dict) -> Tuple[int, List[Signature]]:
    if doc.get("version") != SIGNATURE_FORMAT_VERSION:
        raise InputError(f"unsupported signature file version {doc.get('version')!r}")
    try:
        L = int(doc["L"])
        return L, [Signature.from_dict(s, L) for s in doc["signatures"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed signature set: {exc!r}") from None


def load_signatures(path: Union[str, Path]) -> Tuple[int, List[Signature]]:
    """Read a signature set file; returns ``(L, signatures)``."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSON ({exc})") from None
    return parse_signatures(doc)
