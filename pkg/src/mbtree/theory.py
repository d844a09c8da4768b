"""Collision probabilities of aligned DirPiz sequences and threshold choice.

Two independent length-``m`` sequences collide at one position with
probability ``p``; the chance of exactly ``n`` colliding positions is
approximated by ``C(m, n) * p**n``. A signature set covering ``N_A``
applications tolerates ``n`` collisions when ``N_A * C(m, n) * p**n <= 1``,
which gives the threshold ``2 ** (L + n)``.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import InputError

DEFAULT_P = 3e-3
VALUE_RANGE = (-1500, 1500)

# worked example: N_A = 100 applications, m = L = 10, p = 3e-3 -> n = 1
_REFERENCE_INPUTS = (100, 10, DEFAULT_P)
_REFERENCE_N = 1


@dataclass(frozen=True)
class CollisionModel:
    m: int = 10
    p: float = DEFAULT_P
    value_range: Tuple[int, int] = VALUE_RANGE

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise InputError("p must be in (0, 1)")
        if self.m < 1:
            raise InputError("m must be >= 1")


def collision_prob(m: int, n: int, p: float = DEFAULT_P) -> float:
    if not 0 <= n <= m:
        raise InputError(f"need 0 <= n <= m, got n={n}, m={m}")
    return math.comb(m, n) * p ** n


def binomial_pmf(m: int, p: float) -> np.ndarray:
    """Exact probability of ``n = 0..m`` colliding positions."""
    return np.array([math.comb(m, n) * p ** n * (1 - p) ** (m - n) for n in range(m + 1)])


@dataclass(frozen=True)
class ThresholdSuggestion:
    n: int
    theta: float
    reference_n: Optional[int] = None
    reference_theta: Optional[float] = None


def suggest_threshold(L: int, n_apps: int, m: int = 10, p: float = DEFAULT_P) -> ThresholdSuggestion:
    """Smallest collision depth ``n`` with ``n_apps * C(m, n) * p**n <= 1``.

    For the reference inputs (100 applications, m = 10, p = 3e-3) the
    customary choice ``n = 1`` is returned alongside in ``reference_*``.
    """
    if n_apps < 1:
        raise InputError("n_apps must be >= 1")
    chosen = None
    for n in range(m + 1):
        if n_apps * collision_prob(m, n, p) <= 1:
            chosen = n
            break
    if chosen is None:
        warnings.warn(f"no collision depth satisfies the bound for N_A={n_apps}; using n=m={m}")
        chosen = m
    ref_n = ref_theta = None
    if (n_apps, m) == _REFERENCE_INPUTS[:2] and math.isclose(p, _REFERENCE_INPUTS[2]):
        ref_n = _REFERENCE_N
        ref_theta = 2.0 ** (L + ref_n)
    return ThresholdSuggestion(chosen, 2.0 ** (L + chosen), ref_n, ref_theta)


Distribution = Union[str, Mapping[int, float], Tuple[Sequence[int], Sequence[float]]]

_CHUNK = 1_000_000


def _sampler(distribution: Distribution):
    if isinstance(distribution, str):
        if distribution != "uniform":
            raise InputError(f"unknown distribution {distribution!r}")
        lo, hi = VALUE_RANGE
        # nonzero DirPiz: lo..-1 and 1..hi
        width = hi - lo

        def draw(rng, shape):
            v = rng.integers(lo, hi, size=shape, dtype=np.int32)
            return v + (v >= 0)

        return draw, np.full(width, 1.0 / width)
    if isinstance(distribution, Mapping):
        values, probs = list(distribution.keys()), list(distribution.values())
    else:
        values, probs = distribution
    values = np.asarray(values)
    probs = np.asarray(probs, dtype=float)
    probs = probs / probs.sum()

    def draw(rng, shape):
        return values[rng.choice(len(values), size=shape, p=probs)]

    return draw, probs


def per_position_collision(distribution: Distribution) -> float:
    """Probability two i.i.d. draws are equal (sum of squared pmf)."""
    _, probs = _sampler(distribution)
    return float(np.sum(probs ** 2))


def _mc_chunk(args) -> np.ndarray:
    seed, trials, m, distribution, other = args
    rng = np.random.default_rng(seed)
    draw, _ = _sampler(distribution)
    draw_other = draw if other is None else _sampler(other)[0]
    a = draw(rng, (trials, m))
    b = draw_other(rng, (trials, m))
    hits = (a == b).sum(axis=1)
    return np.bincount(hits, minlength=m + 1)


def monte_carlo_collisions(
    trials: int,
    m: int = 10,
    distribution: Distribution = "uniform",
    seed: int = 0,
    other: Optional[Distribution] = None,
    jobs: int = 1,
) -> np.ndarray:
    """Empirical probability of exactly ``n`` equal positions, ``n = 0..m``.

    Sequence pairs are drawn i.i.d. from ``distribution`` (the second one
    from ``other`` when given). Trials are split into chunks with spawned
    seeds, so the result depends on ``seed`` only, not on ``jobs``.
    """
    if trials < 1:
        raise InputError("trials must be >= 1")
    sizes = [_CHUNK] * (trials // _CHUNK)
    if trials % _CHUNK:
        sizes.append(trials % _CHUNK)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    work = [(s, n, m, distribution, other) for s, n in zip(seeds, sizes)]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            counts = sum(pool.map(_mc_chunk, work))
    else:
        counts = sum(_mc_chunk(w) for w in work)
    return counts / trials
