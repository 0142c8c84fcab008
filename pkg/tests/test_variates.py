"""Hypergeometric / multivariate hypergeometric / binomial samplers.

Small exact cases are asserted directly; distributional fidelity is checked
by chi-square against scipy.stats pmfs, which exercises both the inversion
and the rejection branches.
"""

import numpy as np
import pytest
from scipy import stats

from popsim.oracle import chi_square_gof
from popsim.rng import RngStream
from popsim.variates import binomial, hypergeometric, multivariate_hypergeometric


def _hyper_gof(pop, K, nn, reps=40000, seed=5):
    rng = RngStream(seed)
    draws = np.array([hypergeometric(pop, K, nn, rng) for _ in range(reps)])
    lo = max(0, nn - (pop - K))
    hi = min(nn, K)
    assert draws.min() >= lo and draws.max() <= hi
    ks = np.arange(lo, hi + 1)
    expected = stats.hypergeom.pmf(ks, pop, K, nn)
    observed = np.bincount(draws - lo, minlength=len(ks))
    return chi_square_gof(observed, expected / expected.sum(), reps)


def test_hypergeometric_degenerate_cases():
    rng = RngStream(1)
    assert hypergeometric(10, 10, 3, rng) == 3
    assert hypergeometric(5, 0, 3, rng) == 0
    assert hypergeometric(9, 4, 0, rng) == 0
    assert hypergeometric(9, 4, 9, rng) == 4


def test_hypergeometric_range_validation():
    rng = RngStream(1)
    with pytest.raises(ValueError):
        hypergeometric(5, 6, 2, rng)
    with pytest.raises(ValueError):
        hypergeometric(5, 2, 6, rng)
    with pytest.raises(ValueError):
        hypergeometric(5, -1, 2, rng)


@pytest.mark.parametrize("pop,K,nn", [
    (6, 3, 2),          # exact example: P(X=1) = 3/5
    (20, 7, 13),        # inversion branch
    (50, 30, 45),       # tight support
    (1000, 300, 250),   # rejection branch
    (1000, 700, 800),   # rejection with both symmetries
    (10**6, 4 * 10**5, 10**5),
])
def test_hypergeometric_matches_exact_pmf(pop, K, nn):
    assert _hyper_gof(pop, K, nn) > 1e-3


def test_hypergeometric_exact_example_frequency():
    # population 6, successes 3, draws 2: P(X=1) = C(3,1)C(3,1)/C(6,2) = 3/5
    rng = RngStream(8)
    reps = 100000
    ones = sum(hypergeometric(6, 3, 2, rng) == 1 for _ in range(reps))
    assert abs(ones / reps - 0.6) < 0.006


def test_multivariate_hypergeometric_degenerate():
    rng = RngStream(2)
    assert multivariate_hypergeometric([10, 0], 3, rng).tolist() == [3, 0]
    assert multivariate_hypergeometric([5, 3, 2], 10, rng).tolist() == [5, 3, 2]


def test_multivariate_hypergeometric_totals_and_bounds():
    rng = RngStream(3)
    counts = np.array([4, 7, 0, 2, 5])
    for _ in range(500):
        v = multivariate_hypergeometric(counts, 9, rng)
        assert v.sum() == 9
        assert np.all(v >= 0) and np.all(v <= counts)


def test_multivariate_hypergeometric_exact_probability():
    # counts (4,4), draws 4: P(v = (2,2)) = C(4,2)^2 / C(8,4) = 36/70
    rng = RngStream(4)
    reps = 100000
    hits = sum(multivariate_hypergeometric([4, 4], 4, rng)[0] == 2
               for _ in range(reps))
    assert abs(hits / reps - 36 / 70) < 0.006


def test_multivariate_hypergeometric_marginals_hypergeometric():
    rng = RngStream(6)
    counts = [6, 6]
    reps = 40000
    draws = np.array([multivariate_hypergeometric(counts, 3, rng)[0]
                      for _ in range(reps)])
    ks = np.arange(0, 4)
    expected = stats.hypergeom.pmf(ks, 12, 6, 3)
    observed = np.bincount(draws, minlength=4)
    assert chi_square_gof(observed, expected / expected.sum(), reps) > 1e-3


def test_multivariate_hypergeometric_order_and_validation():
    rng = RngStream(7)
    v = multivariate_hypergeometric([3, 3, 3], 4, rng, order=[2, 1, 0])
    assert v.sum() == 4
    with pytest.raises(ValueError):
        multivariate_hypergeometric([3, 3], 7, rng)
    with pytest.raises(ValueError):
        multivariate_hypergeometric([3, 3], 2, rng, order=[0, 0])


@pytest.mark.parametrize("n,p", [(10, 0.5), (100, 0.5), (1000, 0.37),
                                 (64, 0.9), (5000, 0.004)])
def test_binomial_matches_exact_pmf(n, p):
    rng = RngStream(11)
    reps = 40000
    draws = np.array([binomial(n, p, rng) for _ in range(reps)])
    ks = np.arange(0, n + 1)
    expected = stats.binom.pmf(ks, n, p)
    observed = np.bincount(draws, minlength=n + 1)
    assert chi_square_gof(observed, expected / expected.sum(), reps) > 1e-3


def test_binomial_edges():
    rng = RngStream(12)
    assert binomial(0, 0.5, rng) == 0
    assert binomial(5, 0.0, rng) == 0
    assert binomial(5, 1.0, rng) == 5
    with pytest.raises(ValueError):
        binomial(-1, 0.5, rng)
    with pytest.raises(ValueError):
        binomial(5, 1.5, rng)
