"""Fixed-length directed payload-size (DirPiz) sequences.

A DirPiz is the payload length of one message, positive when sent by the
client and negative when sent by the server. ``0`` is padding.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import AbstractSet, Any, Iterable, List, Sequence, Tuple, Union

from .capture.sessions import Session
from .errors import InputError

MAX_DIRPIZ = 65535
DEFAULT_MAX_LEVEL = 10


@dataclass(frozen=True)
class DirPizSeq:
    values: Tuple[int, ...]
    origin: Any = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        values = tuple(int(v) for v in self.values)
        object.__setattr__(self, "values", values)
        padded = False
        for v in values:
            if v == 0:
                padded = True
            elif padded:
                raise InputError(f"padding must be a suffix: {values}")
            elif abs(v) > MAX_DIRPIZ:
                raise InputError(f"DirPiz {v} out of range")

    @property
    def L(self) -> int:
        return len(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, i):
        return self.values[i]


def _check_level(L: int) -> None:
    if L < 1:
        raise InputError("max level L must be >= 1")


def pad(values: Sequence[int], L: int, origin=None) -> DirPizSeq:
    values = list(values[:L])
    return DirPizSeq(tuple(values + [0] * (L - len(values))), origin)


def extract_head(session: Session, L: int) -> DirPizSeq:
    """First ``L`` signed payload sizes in chronological order."""
    _check_level(L)
    return pad(session.signed_sizes()[:L], L, session)


def extract_tail(session: Session, L: int) -> DirPizSeq:
    """Last ``L`` signed payload sizes, newest first."""
    _check_level(L)
    sizes = session.signed_sizes()
    return pad(sizes[::-1][:L], L, session)


def apply_stoplist(seq: DirPizSeq, stoplist: AbstractSet[int]) -> DirPizSeq:
    if not stoplist:
        return seq
    kept = [v for v in seq.values if v != 0 and v not in stoplist]
    return pad(kept, len(seq), seq.origin)


def session_sequences(
    sessions: Iterable[Session], L: int, stoplist: AbstractSet[int] = frozenset()
) -> Tuple[List[DirPizSeq], List[DirPizSeq]]:
    """Head and tail sequences of every session, stoplist applied."""
    heads, tails = [], []
    for s in sessions:
        heads.append(apply_stoplist(extract_head(s, L), stoplist))
        tails.append(apply_stoplist(extract_tail(s, L), stoplist))
    return heads, tails


def load_stoplist(path: Union[str, Path]) -> frozenset:
    values = set()
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            values.add(int(line))
        except ValueError:
            raise InputError(f"{path}:{lineno}: not an integer: {line!r}") from None
    return frozenset(values)
