"""Simulators for probabilistic population protocols.

Sequential simulators execute one uniformly random ordered interaction at a
time over interchangeable urn backends (array, linear scan, binary tree,
dynamic alias table).  Batched simulators process whole collision-free runs
at once through interaction matrices, reaching sub-constant amortized work
per interaction, and are exact: tiny instances match the sequential Markov
chain distribution, not just its limit.
"""

from .batched import (
    EpochLengthController,
    EpochState,
    batched_step,
    multibatched_epoch,
    run_batched,
    sample_interaction_matrix,
    simulate_batched,
    simulate_batched_many,
    tune_epoch_length,
)
from .drivers import SIMULATORS, simulate, simulate_many, verify_against_oracle
from .oracle import (
    brute_force_distribution,
    chi_square_gof,
    exact_distribution,
    total_variation,
)
from .protocols import (
    CoinIncrementProtocol,
    Protocol,
    SkipSet,
    build_partition,
    default_initial_counts,
    detect_skips,
    identity_protocol,
    leader_election,
    make_protocol,
    phase_clock,
    random_two_way,
    renaming_permutation,
    running_clock_counts,
    swap_protocol,
    uniform_clock_counts,
)
from .rng import RngStream, spawn_seed
from .runlength import (
    mean_run_length,
    run_length_pmf,
    run_length_sf,
    sample_run_length,
    sample_run_lengths,
)
from .sequential import (
    Heuristics,
    SimConfig,
    run_sequential,
    simulate_sequential,
    simulate_sequential_many,
)
from .urns import AliasUrn, ArrayUrn, BstUrn, LinearUrn, make_urn
from .variates import binomial, hypergeometric, multivariate_hypergeometric

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
