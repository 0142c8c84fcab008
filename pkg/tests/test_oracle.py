"""Exact configuration distributions and statistical comparison utilities."""

import numpy as np
import pytest
from scipy import stats

from popsim.oracle import (
    brute_force_distribution,
    chi_square_gof,
    compare_to_exact,
    empirical_distribution,
    exact_distribution,
    total_variation,
)
from popsim.protocols import (
    CoinIncrementProtocol,
    identity_protocol,
    leader_election,
    random_two_way,
    swap_protocol,
)
from popsim.rng import RngStream


def test_identity_is_point_mass():
    ident = identity_protocol(2)
    for horizon in (0, 1, 5):
        dist = exact_distribution(ident, (2, 2), horizon)
        assert dist == pytest.approx({(2, 2): 1.0})


def test_leader_election_hand_cases():
    le = leader_election()
    assert exact_distribution(le, (0, 2), 1) == pytest.approx({(1, 1): 1.0})
    # n=3 all leaders: every ordered pair demotes the initiator
    assert exact_distribution(le, (0, 3), 1) == pytest.approx({(1, 2): 1.0})


def test_mass_conserved_every_horizon():
    le = leader_election()
    for h in range(0, 9):
        dist = exact_distribution(le, (0, 4), h)
        assert sum(dist.values()) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("proto,initial,horizon", [
    (leader_election(), (0, 4), 3),
    (leader_election(), (1, 3), 2),
    (swap_protocol(2), (2, 2), 3),
    (random_two_way(3, 7), (2, 1, 1), 2),
])
def test_agrees_with_independent_brute_force(proto, initial, horizon):
    a = exact_distribution(proto, initial, horizon)
    b = brute_force_distribution(proto, initial, horizon)
    assert total_variation(a, b) < 1e-12


def test_randomized_protocol_with_exact_outcomes():
    proto = CoinIncrementProtocol(3)
    dist = exact_distribution(proto, (2, 0, 0), 1)
    # the interacting pair is always (0,0); a fair coin advances one side
    assert dist == pytest.approx({(1, 1, 0): 1.0})
    dist = exact_distribution(proto, (1, 1, 0), 1)
    assert dist[(0, 2, 0)] == pytest.approx(0.5)  # the phase-0 agent advances
    assert dist[(1, 0, 1)] == pytest.approx(0.5)


def test_state_space_bound_enforced():
    rt = random_two_way(6, 3)
    with pytest.raises(ValueError):
        exact_distribution(rt, (20,) * 6, 50)


def test_exact_distribution_validation():
    le = leader_election()
    with pytest.raises(ValueError):
        exact_distribution(le, (0, 1), 1)  # one agent cannot interact
    with pytest.raises(ValueError):
        exact_distribution(le, (0, 2), -1)
    with pytest.raises(ValueError):
        exact_distribution(le, (0, 2, 0), 1)  # wrong length


def test_total_variation_cases():
    assert total_variation({1: 0.5, 2: 0.5}, {1: 0.5, 2: 0.5}) == 0.0
    assert total_variation({1: 1.0}, {2: 1.0}) == 1.0
    assert total_variation({1: 0.5, 2: 0.5}, {1: 0.75, 2: 0.25}) == pytest.approx(0.25)


def test_chi_square_cases():
    assert chi_square_gof([50, 50], [0.5, 0.5]) == 1.0
    assert chi_square_gof([100, 0], [0.5, 0.5]) < 1e-20
    assert chi_square_gof([100], [1.0]) == 1.0
    # bins under the pooling threshold merge into one
    p = chi_square_gof([96, 2, 1, 1], [0.96, 0.02, 0.01, 0.01], 100)
    assert 0.5 < p <= 1.0
    with pytest.raises(ValueError):
        chi_square_gof([10, 10], [0.6, 0.6])


def test_chi_square_p_values_uniform_under_null():
    # sampling from the stated distribution must give U[0,1]-ish p-values
    probs = np.array([0.5, 0.3, 0.15, 0.05])
    rng = np.random.default_rng(0)
    ps = []
    for _ in range(300):
        draws = rng.multinomial(2000, probs)
        ps.append(chi_square_gof(draws, probs, 2000))
    ks = stats.kstest(ps, "uniform")
    assert ks.pvalue > 1e-3


def test_compare_to_exact_negative_control():
    # samples from the wrong horizon must be rejected decisively
    le = leader_election()
    exact6 = exact_distribution(le, (0, 4), 6)
    exact3 = exact_distribution(le, (0, 4), 3)
    rng = np.random.default_rng(1)
    keys = sorted(exact3)
    draws = rng.choice(len(keys), size=200_000,
                       p=[exact3[k] for k in keys])
    samples = [keys[i] for i in draws]
    tv, p = compare_to_exact(samples, exact6)
    assert tv > 0.03
    assert p < 1e-6
    tv_ok, p_ok = compare_to_exact(samples, exact3)
    assert tv_ok < 0.01 and p_ok > 1e-3


def test_empirical_distribution_normalizes():
    emp = empirical_distribution([(1, 0), (1, 0), (0, 1), (1, 0)])
    assert emp == {(1, 0): 0.75, (0, 1): 0.25}
