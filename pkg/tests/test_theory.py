import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mbtree.errors import InputError
from mbtree.theory import (
    binomial_pmf, collision_prob, monte_carlo_collisions, per_position_collision, suggest_threshold,
)

TABLE = [3e-2, 4e-4, 3e-6, 1e-8, 6e-11, 1e-13, 2e-16, 3e-19, 2e-22, 6e-26]


def within_one_digit(x, ref):
    """``x`` lies within one unit of ``ref``'s leading significant digit."""
    unit = 10.0 ** math.floor(math.log10(ref))
    return abs(x - ref) < unit


@pytest.mark.parametrize("n, ref", list(enumerate(TABLE, 1)))
def test_collision_table(n, ref):
    assert within_one_digit(collision_prob(10, n, 3e-3), ref)


def test_collision_edges():
    assert collision_prob(10, 0) == 1.0
    assert collision_prob(10, 10) == pytest.approx(3e-3 ** 10)
    with pytest.raises(InputError):
        collision_prob(3, 4)


@given(st.integers(1, 30), st.floats(1e-6, 0.5))
def test_binomial_pmf_sums_to_one(m, p):
    assert binomial_pmf(m, p).sum() == pytest.approx(1.0)


def test_suggest_threshold_worked_inputs():
    s = suggest_threshold(10, 100, 10, 3e-3)
    assert (s.reference_n, s.reference_theta) == (1, 2048.0)
    assert (s.n, s.theta) == (2, 4096.0)


def test_suggest_single_application():
    s = suggest_threshold(10, 1)
    assert (s.n, s.theta) == (0, 1024.0)
    assert s.reference_n is None


def test_suggest_no_depth_qualifies_warns():
    with pytest.warns(UserWarning):
        s = suggest_threshold(4, 10 ** 6, m=2, p=0.5)
    assert s.n == 2


@given(st.integers(1, 10 ** 4), st.integers(2, 12), st.floats(1e-4, 0.2))
def test_suggested_depth_is_minimal(n_apps, m, p):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        s = suggest_threshold(8, n_apps, m, p)
    ok = [n for n in range(m + 1) if n_apps * collision_prob(m, n, p) <= 1]
    assert s.n == (ok[0] if ok else m)
    assert s.theta == 2.0 ** (8 + s.n)


def test_uniform_per_position_probability():
    assert per_position_collision("uniform") == pytest.approx(1 / 3000)


def test_monte_carlo_p_any_collision():
    emp = monte_carlo_collisions(2 * 10 ** 6, seed=3)
    expected = 1 - (1 - 1 / 3000) ** 10
    assert 1 - emp[0] == pytest.approx(expected, rel=0.2)


def test_monte_carlo_degenerate_and_disjoint():
    assert monte_carlo_collisions(1000, distribution={7: 1.0})[10] == 1.0
    emp = monte_carlo_collisions(1000, distribution={1: 0.5, 2: 0.5}, other={3: 0.5, 4: 0.5})
    assert emp[0] == 1.0


def test_monte_carlo_independent_of_jobs():
    a = monte_carlo_collisions(2_500_000, seed=11, jobs=1)
    b = monte_carlo_collisions(2_500_000, seed=11, jobs=3)
    assert np.array_equal(a, b)


def test_monte_carlo_bad_input():
    with pytest.raises(InputError):
        monte_carlo_collisions(0)
    with pytest.raises(InputError):
        monte_carlo_collisions(10, distribution="zipf")
