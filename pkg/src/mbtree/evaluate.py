"""Per-host detection metrics and parameter sweeps."""

from __future__ import annotations

import csv
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import AbstractSet, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .capture.hosts import HostTrace
from .detect import Verdict, host_trees, predict
from .errors import InputError
from .mltree import Signature, add_to_set, build_signature
from .similarity import DEFAULT_RT_CLAMP, ScoreParams, score_components

BENIGN = "benign"


@dataclass(frozen=True)
class LabeledOutcome:
    host: str
    true_label: str
    predicted_label: str
    verdict: Verdict

    def __post_init__(self):
        if (self.verdict is Verdict.BENIGN) != (self.predicted_label == BENIGN):
            raise InputError(f"{self.host}: predicted label {self.predicted_label!r} contradicts verdict")


@dataclass(frozen=True)
class Metrics:
    """Percentages. FPR/FNR on benign-vs-malicious, Acc/macro-F1 on full labels."""

    fpr: float
    fnr: float
    acc: float
    macro_f1: float


def outcome(host: str, true_label: str, verdict: Verdict, label: Optional[str]) -> LabeledOutcome:
    return LabeledOutcome(host, true_label, label if verdict is Verdict.MALICIOUS else BENIGN, verdict)


def _ratio(num: int, den: int) -> float:
    return 100.0 * num / den if den else math.nan


def metrics(outcomes: Iterable[LabeledOutcome]) -> Metrics:
    outcomes = list(outcomes)
    if not outcomes:
        raise InputError("need at least one outcome")
    fp = tn = fn = tp = 0
    for o in outcomes:
        actual = o.true_label != BENIGN
        flagged = o.verdict is Verdict.MALICIOUS
        if actual:
            tp += flagged
            fn += not flagged
        else:
            fp += flagged
            tn += not flagged
    correct = sum(o.true_label == o.predicted_label for o in outcomes)

    # macro F1 over classes that occur in the ground truth
    f1s = []
    for cls in sorted({o.true_label for o in outcomes}):
        c_tp = sum(o.true_label == cls and o.predicted_label == cls for o in outcomes)
        c_fp = sum(o.true_label != cls and o.predicted_label == cls for o in outcomes)
        c_fn = sum(o.true_label == cls and o.predicted_label != cls for o in outcomes)
        denom = 2 * c_tp + c_fp + c_fn
        f1s.append(2 * c_tp / denom if denom else 0.0)
    return Metrics(_ratio(fp, fp + tn), _ratio(fn, fn + tp), _ratio(correct, len(outcomes)), 100.0 * float(np.mean(f1s)))


def theta_grid(L: int, points: int = 10) -> List[float]:
    """``points`` log-spaced thresholds from ``2**L`` to ``2**(L+2)``."""
    return [float(x) for x in np.logspace(L, L + 2, points, base=2.0)]


def build_signature_set(
    train: Sequence[Tuple[str, HostTrace]], L: int, stoplist: AbstractSet[int] = frozenset()
) -> List[Signature]:
    """One signature per label; hosts sharing a label are merged."""
    sigs: List[Signature] = []
    for label, trace in train:
        sigs = add_to_set(sigs, build_signature(trace, label, L, stoplist))
    return sigs


def _components_row(args):
    trace, sigs, L, stoplist, rt_clamp = args
    test = host_trees(trace, L, stoplist)
    return [score_components(test, s, rt_clamp) for s in sigs]


def sweep(
    train: Sequence[Tuple[str, HostTrace]],
    test: Sequence[Tuple[HostTrace, str]],
    alphas: Sequence[float] = (0.3,),
    betas: Sequence[float] = (0.7,),
    levels: Sequence[int] = (10,),
    thetas: Optional[Sequence[float]] = None,
    stoplist: AbstractSet[int] = frozenset(),
    rt_clamp=DEFAULT_RT_CLAMP,
    jobs: int = 1,
) -> List[Dict[str, float]]:
    """Full-factorial evaluation; one row per ``(L, alpha, beta, theta)``.

    ``thetas=None`` samples :func:`theta_grid` for each ``L``. Component
    scores do not depend on alpha, beta or theta, so they are computed once
    per ``L`` and recombined.
    """
    if not (alphas and betas and levels) or (thetas is not None and not thetas):
        raise InputError("empty parameter grid")
    if not test:
        raise InputError("no test hosts")
    rows = []
    for L in levels:
        sigs = build_signature_set(train, L, stoplist)
        if not sigs:
            raise InputError("no training hosts")
        work = [(trace, sigs, L, stoplist, rt_clamp) for trace, _ in test]
        if jobs > 1 and len(work) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                components = list(pool.map(_components_row, work))
        else:
            components = [_components_row(w) for w in work]
        grid = theta_grid(L) if thetas is None else list(thetas)
        for alpha, beta in itertools.product(alphas, betas):
            vectors = [[c.combine(alpha, beta) for c in row] for row in components]
            for theta in grid:
                params = ScoreParams(alpha, beta, theta, L, rt_clamp)
                outs = []
                for (trace, truth), scores in zip(test, vectors):
                    rep = predict(trace.host_ip, scores, sigs, params)
                    outs.append(outcome(trace.host_ip, truth, rep.verdict, rep.predicted_label))
                m = metrics(outs)
                rows.append({"L": L, "alpha": alpha, "beta": beta, "theta": theta, **asdict(m)})
    return rows


def write_rows(rows: Sequence[dict], path_or_file) -> None:
    if not rows:
        return
    fields = list(rows[0].keys())
    if isinstance(path_or_file, (str, Path)):
        with open(path_or_file, "w", newline="") as fh:
            _write(fh, fields, rows)
    else:
        _write(path_or_file, fields, rows)


def _write(fh, fields, rows) -> None:
    writer = csv.DictWriter(fh, fieldnames=fields)
    writer.writeheader()
    writer.writerows(rows)


def read_truth(path: Union[str, Path]) -> Dict[str, str]:
    """``host,label`` CSV (header optional) to a host -> label map."""
    truth = {}
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].startswith("#"):
                continue
            if row[0].strip().lower() == "host":
                continue
            if len(row) < 2:
                raise InputError(f"{path}: expected host,label rows, got {row}")
            truth[row[0].strip()] = row[1].strip()
    return truth
