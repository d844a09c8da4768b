"""Similarity between a test host's MLTrees and a signature.

Scores are exponential in the amount of shared structure, so every score
is handled as its base-2 logarithm; the ``*_score`` helpers convert back
to linear values when they fit in a float.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, NamedTuple, Optional, Sequence, Tuple

from .errors import InputError
from .mltree import ROOT, Edge, MLTree, Signature

DEFAULT_ALPHA = 0.3
DEFAULT_BETA = 0.7
DEFAULT_THETA = 2048.0
DEFAULT_RT_CLAMP = (1e-3, 1e3)


@dataclass(frozen=True)
class ScoreParams:
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    theta: float = DEFAULT_THETA
    L: int = 10
    rt_clamp: Optional[Tuple[float, float]] = DEFAULT_RT_CLAMP

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise InputError(f"alpha must be in [0, 1], got {self.alpha}")
        if not 0.0 <= self.beta <= 1.0:
            raise InputError(f"beta must be in [0, 1], got {self.beta}")
        if not self.theta > 0:
            raise InputError(f"theta must be positive, got {self.theta}")
        if self.L < 1:
            raise InputError(f"L must be >= 1, got {self.L}")
        if self.rt_clamp is not None:
            lo, hi = self.rt_clamp
            if not 0 < lo <= hi:
                raise InputError(f"bad R_t clamp {self.rt_clamp}")

    @property
    def log2_theta(self) -> float:
        return math.log2(self.theta)


@dataclass(frozen=True)
class CWP:
    """Common weighted path: per level, common edges with signature counts."""

    levels: Tuple[Dict[Edge, int], ...]

    @property
    def depth(self) -> int:
        """Number of leading non-empty levels (L')."""
        for l, level in enumerate(self.levels):
            if not level:
                return l
        return len(self.levels)


@dataclass(frozen=True)
class CommonNodes:
    """Per-level node intersection with the smaller of the two counts."""

    levels: Tuple[Dict[int, int], ...]


def _same_L(test: MLTree, sig: MLTree) -> None:
    if test.L != sig.L:
        raise InputError(f"tree L mismatch: {test.L} vs {sig.L}")


def cwp(test: MLTree, sig: MLTree) -> CWP:
    """Edges shared by both trees that continue a shared edge one level up."""
    _same_L(test, sig)
    levels = []
    frontier = {ROOT}
    for l in range(sig.L):
        common = {
            e: c for e, c in sig.edges[l].items() if e[0] in frontier and e in test.edges[l]
        }
        if not common:
            break
        levels.append(common)
        frontier = {child for _, child in common}
    levels.extend({} for _ in range(sig.L - len(levels)))
    return CWP(tuple(levels))


def common_nodes(test: MLTree, sig: MLTree) -> CommonNodes:
    _same_L(test, sig)
    levels = []
    for tn, mn in zip(test.nodes, sig.nodes):
        small, big = (tn, mn) if len(tn) <= len(mn) else (mn, tn)
        levels.append({n: min(c, big[n]) for n, c in small.items() if n in big})
    return CommonNodes(tuple(levels))


def _check_rt(rt: float) -> None:
    if not rt > 0:
        raise InputError(f"time ratio must be positive, got {rt}")


def path_log2(c: CWP, sig: MLTree, rt: float) -> float:
    """log2 of the path similarity.

    Exponent ``L' + sum_l share_l * l**2 / L' * rt`` over 1-based levels
    ``l <= L'``, where ``share_l`` is the fraction of the signature's edge
    mass at that level covered by the CWP.
    """
    _check_rt(rt)
    depth = c.depth
    exponent = float(depth)
    for l in range(depth):
        total = sig.edge_total(l)
        if total == 0:
            continue
        share = sum(c.levels[l].values()) / total
        exponent += share * (l + 1) ** 2 / depth * rt
    return exponent


def node_log2(cn: CommonNodes, sig: MLTree, rt: float, L: Optional[int] = None) -> float:
    """log2 of the node similarity: ``L + sum_l share_l * rt``."""
    _check_rt(rt)
    L = sig.L if L is None else L
    exponent = float(L)
    for l in range(min(L, len(cn.levels))):
        total = sig.node_total(l)
        if total == 0:
            continue
        exponent += sum(cn.levels[l].values()) / total * rt
    return exponent


def exp2(x: float) -> float:
    """``2 ** x``, or ``inf`` when it does not fit in a float."""
    try:
        return 2.0 ** x
    except OverflowError:
        return math.inf


def path_score(c: CWP, sig: MLTree, rt: float) -> float:
    return exp2(path_log2(c, sig, rt))


def node_score(cn: CommonNodes, sig: MLTree, rt: float, L: Optional[int] = None) -> float:
    return exp2(node_log2(cn, sig, rt, L))


def _check_weights(alpha: float, beta: float) -> None:
    if not (0.0 <= alpha <= 1.0 and 0.0 <= beta <= 1.0):
        raise InputError(f"alpha/beta out of [0, 1]: {alpha}, {beta}")


def combined_score(s_fp: float, s_fn: float, s_lp: float, s_ln: float, params: ScoreParams) -> float:
    """Blend head/tail path/node scores: beta weighs head vs tail, alpha path vs node."""
    a, b = params.alpha, params.beta
    _check_weights(a, b)
    if min(s_fp, s_fn, s_lp, s_ln) < 0:
        raise InputError("component scores must be non-negative")
    return b * (a * s_fp + (1 - a) * s_fn) + (1 - b) * (a * s_lp + (1 - a) * s_ln)


def combined_log2(x_fp: float, x_fn: float, x_lp: float, x_ln: float, alpha: float, beta: float) -> float:
    """log2 of :func:`combined_score` given log2 component scores."""
    _check_weights(alpha, beta)
    terms = [
        (beta * alpha, x_fp),
        (beta * (1 - alpha), x_fn),
        ((1 - beta) * alpha, x_lp),
        ((1 - beta) * (1 - alpha), x_ln),
    ]
    terms = [(w, x) for w, x in terms if w > 0]
    top = max(x for _, x in terms)
    return top + math.log2(sum(w * 2.0 ** (x - top) for w, x in terms))


def time_ratio(sig_duration: float, test_duration: float, clamp: Optional[Tuple[float, float]] = DEFAULT_RT_CLAMP) -> float:
    if not (sig_duration > 0 and test_duration > 0):
        raise InputError("durations must be positive")
    rt = sig_duration / test_duration
    if clamp is not None:
        rt = min(max(rt, clamp[0]), clamp[1])
    return rt


class Components(NamedTuple):
    """log2 head-path, head-node, tail-path and tail-node scores."""

    head_path: float
    head_node: float
    tail_path: float
    tail_node: float

    def combine(self, alpha: float, beta: float) -> float:
        return combined_log2(self.head_path, self.head_node, self.tail_path, self.tail_node, alpha, beta)


def score_components(test: Signature, sig: Signature, rt_clamp=DEFAULT_RT_CLAMP) -> Components:
    rt = time_ratio(sig.duration, test.duration, rt_clamp)
    return Components(
        path_log2(cwp(test.head, sig.head), sig.head, rt),
        node_log2(common_nodes(test.head, sig.head), sig.head, rt),
        path_log2(cwp(test.tail, sig.tail), sig.tail, rt),
        node_log2(common_nodes(test.tail, sig.tail), sig.tail, rt),
    )


def score_host(test: Signature, sig: Signature, params: ScoreParams) -> float:
    """log2 similarity of a test host (signature-shaped) against one signature."""
    if sig.L != params.L or test.L != params.L:
        raise InputError(f"trees built with L={test.L}/{sig.L}, params say L={params.L}")
    return score_components(test, sig, params.rt_clamp).combine(params.alpha, params.beta)


def score_vector(test: Signature, sigs: Sequence[Signature], params: ScoreParams) -> list:
    return [score_host(test, s, params) for s in sigs]
