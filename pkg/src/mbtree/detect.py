"""Threshold prediction over similarity vectors, plus the flow-level baseline."""

from __future__ import annotations

import enum
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import AbstractSet, Iterable, List, Optional, Sequence

import numpy as np

from .capture.hosts import HostTrace
from .dirpiz import DirPizSeq, extract_head, session_sequences
from .errors import ConfigurationError
from .mltree import Signature, build
from .similarity import ScoreParams, score_host


class Verdict(str, enum.Enum):
    BENIGN = "benign"
    MALICIOUS = "malicious"


@dataclass(frozen=True)
class DetectionReport:
    host: str
    scores: tuple  # log2 similarity per signature, signature order
    max_score: float
    max_index: int
    verdict: Verdict
    predicted_label: Optional[str] = None

    def to_dict(self) -> dict:
        out = {
            "host": self.host,
            "verdict": self.verdict.value,
            "max_log2_score": self.max_score,
            "scores": list(self.scores),
        }
        if self.predicted_label is not None:
            out["label"] = self.predicted_label
        return out


def host_trees(trace: HostTrace, L: int, stoplist: AbstractSet[int] = frozenset()) -> Signature:
    """Head/tail trees of a test host, in signature form (label = host IP)."""
    heads, tails = session_sequences(trace.sessions, L, stoplist)
    return Signature(trace.host_ip, build(heads, L), build(tails, L), max(trace.capture_duration, 1.0))


def predict(host: str, scores: Sequence[float], sigs: Sequence[Signature], params: ScoreParams) -> DetectionReport:
    """Malicious iff the best log2 score strictly exceeds log2(theta).

    Ties on the best score go to the lowest signature index.
    """
    best = 0
    for i, s in enumerate(scores):
        if s > scores[best]:
            best = i
    top = scores[best]
    if top > params.log2_theta:
        return DetectionReport(host, tuple(scores), top, best, Verdict.MALICIOUS, sigs[best].label)
    return DetectionReport(host, tuple(scores), top, best, Verdict.BENIGN)


def _score_one(args) -> float:
    test, sig, params = args
    return score_host(test, sig, params)


def _detect_one(args) -> DetectionReport:
    trace, sigs, params, stoplist = args
    return detect_host(trace, sigs, params, stoplist)


def default_jobs() -> int:
    return os.cpu_count() or 1


def detect_host(
    trace: HostTrace,
    sigs: Sequence[Signature],
    params: ScoreParams,
    stoplist: AbstractSet[int] = frozenset(),
    jobs: int = 1,
) -> DetectionReport:
    """Score one host against every signature and apply the threshold.

    With ``jobs > 1`` each signature is scored in a worker process.
    """
    if not sigs:
        raise ConfigurationError("signature set is empty")
    test = host_trees(trace, params.L, stoplist)
    if jobs > 1 and len(sigs) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(sigs))) as pool:
            scores = list(pool.map(_score_one, [(test, s, params) for s in sigs]))
    else:
        scores = [score_host(test, s, params) for s in sigs]
    return predict(trace.host_ip, scores, sigs, params)


def detect_hosts(
    traces: Iterable[HostTrace],
    sigs: Sequence[Signature],
    params: ScoreParams,
    stoplist: AbstractSet[int] = frozenset(),
    jobs: int = 1,
) -> List[DetectionReport]:
    """Detect many hosts; reports come back in input order for any ``jobs``."""
    if not sigs:
        raise ConfigurationError("signature set is empty")
    traces = list(traces)
    if jobs > 1 and len(traces) > 1:
        chunk = max(1, len(traces) // (jobs * 4))
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            work = [(t, sigs, params, stoplist) for t in traces]
            return list(pool.map(_detect_one, work, chunksize=chunk))
    return [detect_host(t, sigs, params, stoplist) for t in traces]


def cosine_similarity(a: Sequence[int], b: Sequence[int]) -> float:
    """Cosine of two sequences; 0 when either is all zeros."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(a @ b / (na * nb))


def dirpiz_seq_baseline(
    trace: HostTrace, sig_seqs: Sequence[DirPizSeq], threshold: float = 0.99, L: Optional[int] = None
) -> Verdict:
    """Flow-level baseline: any session head within cosine ``threshold`` of any signature sequence."""
    if not sig_seqs or not trace.sessions:
        return Verdict.BENIGN
    L = sig_seqs[0].L if L is None else L
    sig = np.array([s.values for s in sig_seqs], dtype=float)
    test = np.array([extract_head(s, L).values for s in trace.sessions], dtype=float)
    sig_norm = np.linalg.norm(sig, axis=1)
    test_norm = np.linalg.norm(test, axis=1)
    denom = np.outer(test_norm, sig_norm)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = np.where(denom > 0, test @ sig.T / np.where(denom > 0, denom, 1.0), 0.0)
    return Verdict.MALICIOUS if (cos >= threshold).any() else Verdict.BENIGN
