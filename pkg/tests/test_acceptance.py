"""Acceptance suite: one test per release criterion, pinned tolerances.

Each test prints a PASS/FAIL line (run with `pytest -s` to see them live).
Criterion 9 (scaling figures) belongs to the frontend package and has its
own suite there; this module also exports the bench CSV it consumes to
artifacts/bench.csv.

Heavy statistical checks use 10^6 seeded runs and total-variation budget
0.005 against the exact Markov chain; all seeds are pinned, so reruns are
deterministic.
"""

import math
import os
import tracemalloc

import numpy as np
import pytest

from popsim.batched import EpochState, multibatched_epoch, simulate_batched
from popsim.cli import BENCH_HEADER, ExperimentSpec, bench_simulator
from popsim.drivers import SIMULATORS, simulate_many
from popsim.oracle import chi_square_gof, compare_to_exact, exact_distribution
from popsim.protocols import identity_protocol, leader_election, random_two_way
from popsim.rng import RngStream
from popsim.runlength import run_length_pmf, sample_run_lengths
from popsim.sequential import Heuristics, simulate_sequential
from popsim.urns import AliasUrn, BstUrn

REPS = 1_000_000
TV_BUDGET = 0.005
CHI_SIG = 1e-3
THREADS = min(2, os.cpu_count() or 1)
RT_TABLE_SEED = 12345

ARTIFACTS = os.path.join(os.path.dirname(__file__), "..", "artifacts")

SCENARIOS = (
    ("leader-election n=4 horizon=6", leader_election(), [0, 4], 6, 41),
    ("random-two-way n=6 q=3 horizon=8", random_two_way(3, RT_TABLE_SEED),
     [2, 2, 2], 8, 43),
)


def _report(criterion: str, passed: bool, detail: str = "") -> None:
    flag = "PASS" if passed else "FAIL"
    print(f"[criterion {criterion}] {flag} {detail}")


# ---------------------------------------------------------------------------
# criterion 1: oracle equivalence of all six simulators


@pytest.mark.parametrize("scenario", SCENARIOS, ids=[s[0] for s in SCENARIOS])
def test_criterion_1_oracle_equivalence(scenario):
    label, protocol, initial, horizon, seed = scenario
    exact = exact_distribution(protocol, tuple(initial), horizon)
    worst = ("", 0.0)
    ok = True
    for sim in SIMULATORS:
        outs = simulate_many(sim, protocol, initial, horizon, seed, REPS,
                             alias_undersized=True, threads=THREADS)
        tv, p = compare_to_exact([tuple(r) for r in outs], exact)
        if tv > worst[1]:
            worst = (sim, tv)
        if not (tv < TV_BUDGET and p > CHI_SIG):
            ok = False
            _report("1", False, f"{label}: {sim} TV={tv:.5f} p={p:.2e}")
        assert tv < TV_BUDGET, f"{sim} on {label}: TV={tv:.5f}"
        assert p > CHI_SIG, f"{sim} on {label}: chi2 p={p:.3e}"
    _report("1", ok, f"{label}: worst {worst[0]} TV={worst[1]:.5f} "
                     f"(budget {TV_BUDGET})")


# ---------------------------------------------------------------------------
# criterion 2: run-length law (pmf + sampler)


@pytest.mark.parametrize("n,r", [(30, 0), (30, 6), (100, 20), (10**4, 500)])
def test_criterion_2_run_length_distribution(n, r):
    draws = sample_run_lengths(n, r, REPS, RngStream(1000 + n + r))
    support = n - r + 1
    expected = np.array([run_length_pmf(n, r, k) for k in range(support)])
    observed = np.bincount(draws, minlength=support)
    p = chi_square_gof(observed, expected / expected.sum(), REPS)
    _report("2", p > CHI_SIG, f"Coll({n},{r}) chi2 p={p:.4f} over {REPS} draws")
    assert p > CHI_SIG


def test_criterion_2_pmf_normalization_grid():
    worst = 0.0
    cases = 0
    for n in range(1, 61):
        for r in range(0, n + 1):
            total = sum(run_length_pmf(n, r, k) for k in range(n - r + 1))
            worst = max(worst, abs(total - 1.0))
            cases += 1
    for n in list(range(61, 1001, 37)) + [1000]:
        for r in sorted({0, 1, n // 3, n // 2, n - 1, n}):
            total = sum(run_length_pmf(n, r, k) for k in range(n - r + 1))
            worst = max(worst, abs(total - 1.0))
            cases += 1
    _report("2", worst < 1e-9,
            f"pmf normalization: worst |sum-1|={worst:.2e} over {cases} (n,r)")
    assert worst < 1e-9


# ---------------------------------------------------------------------------
# criterion 3: expected run length bounds


def test_criterion_3_expected_length_sqrt_n():
    ok = True
    details = []
    for n in (10**2, 10**4, 10**6):
        draws = sample_run_lengths(n, 0, 100_000, RngStream(2000 + n))
        mean = draws.mean()
        lo = (1 - 1 / math.e) * math.sqrt(n)
        hi = 2 * math.sqrt(n)
        details.append(f"n={n}: {mean:.1f} in [{lo:.1f}, {hi:.1f}]")
        ok &= lo <= mean <= hi
        assert lo <= mean <= hi, details[-1]
    _report("3", ok, "; ".join(details))


def test_criterion_3_expected_length_prescribed():
    ok = True
    details = []
    for n, r in ((10**4, 500), (10**6, 2000)):
        draws = sample_run_lengths(n, r, 100_000, RngStream(3000 + r))
        mean = draws.mean()
        lo = n / (2 * r) * (1 - math.exp(-2 * r * r / n))
        hi = n / r
        details.append(f"(n={n},r={r}): {mean:.2f} in [{lo:.2f}, {hi:.2f}]")
        ok &= lo <= mean <= hi
        assert lo <= mean <= hi, details[-1]
    _report("3", ok, "; ".join(details))


# ---------------------------------------------------------------------------
# criterion 4: dynamic alias table


def test_criterion_4_alias_replay_and_rebuild_bound():
    k = 64
    n0 = k * k * 64
    counts = np.full(k, n0 // k, dtype=np.int64)
    urn = AliasUrn(counts)
    ref = counts.copy()
    rng = RngStream(4004)
    ops = 0
    # mutation phase: 300k sample-without-replacement/add pairs; additions
    # concentrate on a few colors so both rebuild thresholds get exercised
    for _ in range(150_000):
        s = urn.sample_without_replacement(rng)
        ref[s] -= 1
        t = rng.below(8)
        urn.add(t, 1)
        ref[t] += 1
        ops += 2
    assert urn.counts_vector().tolist() == ref.tolist(), "replay diverged"
    assert urn.total() == ref.sum()
    assert urn.rebuilds > 0, "workload failed to exercise rebuilds"
    # frozen phase: 700k with-replacement draws against the fixed counts
    observed = np.zeros(k)
    draws = 700_000
    for _ in range(draws):
        observed[urn.sample_with_replacement(rng)] += 1
    ops += draws
    p = chi_square_gof(observed, ref / ref.sum(), draws)
    c = 4 / min(1 - urn.alpha, urn.beta - 1)
    bound_ok = urn.rebuilds * k <= c * ops
    _report("4", p > CHI_SIG and bound_ok,
            f"replay exact over {ops} ops; chi2 p={p:.4f}; "
            f"rebuilds*k={urn.rebuilds * k} <= {c * ops:.0f}")
    assert p > CHI_SIG
    assert bound_ok


def test_criterion_4_throughput_flat_in_colors():
    ident_rates = {}
    for k in (4, 64, 1024):
        n = k * k * 64
        counts = np.full(k, n // k, dtype=np.int64)
        proto = identity_protocol(k)
        steps = 1 << 19
        simulate_sequential(proto, counts, 4096, seed=1, backend="alias")
        res = simulate_sequential(proto, counts, steps, seed=1, backend="alias")
        # each interaction is 2 removals + 2 insertions
        ident_rates[k] = 4 * steps / res.loop_seconds
    rates = list(ident_rates.values())
    spread = max(rates) / min(rates)
    _report("4", spread <= 2.0,
            f"alias ops/s by k: " +
            ", ".join(f"k={k}: {v / 1e6:.1f}M" for k, v in ident_rates.items()) +
            f"; spread {spread:.2f}x <= 2x")
    assert spread <= 2.0


# ---------------------------------------------------------------------------
# criterion 5: throughput separation at desk scale


def _bench(simulator, n, steps, reps=5):
    spec = ExperimentSpec(protocol="uniform-clock", simulator=simulator,
                          n=n, interactions=steps, states=8, seed=77,
                          reps=reps)
    median, sd = bench_simulator(spec)
    return median, sd


def test_criterion_5_throughput_separation():
    rows = []
    results = {}
    for sim, sizes in (("multibatched", (1 << 16, 1 << 20, 1 << 24)),
                       ("seq-bst", (1 << 16, 1 << 20, 1 << 24))):
        for n in sizes:
            reps = 5
            median, sd = _bench(sim, n, n, reps)
            results[(sim, n)] = median
            rows.append(f"{sim},uniform-clock,{n},8,1,{median:.3f},{sd:.3f}")
    os.makedirs(ARTIFACTS, exist_ok=True)
    with open(os.path.join(ARTIFACTS, "bench.csv"), "w", newline="\n") as fh:
        fh.write(BENCH_HEADER + "\n")
        for row in rows:
            fh.write(row + "\n")

    big = 1 << 24
    ratio_vs_bst = results[("seq-bst", big)] / results[("multibatched", big)]
    ratio_scaling = results[("multibatched", 1 << 16)] / results[("multibatched", big)]
    ok = ratio_vs_bst >= 10.0 and ratio_scaling >= 4.0
    _report("5", ok,
            f"multibatched {results[('multibatched', big)]:.2f} ns/int vs "
            f"seq-bst {results[('seq-bst', big)]:.2f} ({ratio_vs_bst:.1f}x >= 10x); "
            f"2^16 -> 2^24 self-speedup {ratio_scaling:.1f}x >= 4x")
    assert ratio_vs_bst >= 10.0
    assert ratio_scaling >= 4.0


# ---------------------------------------------------------------------------
# criterion 6: agents drawn per epoch tracks sqrt(rho * n)


def test_criterion_6_epoch_length_law():
    n = 1 << 20
    ident = identity_protocol(2)
    state = EpochState(C=BstUrn(np.array([n // 2, n // 2], dtype=np.int64)),
                       Cp=BstUrn(np.zeros(2, dtype=np.int64)), n=n)
    rng = RngStream(6006)
    rhos = [2, 8, 32]
    means = []
    for rho in rhos:
        draws = [multibatched_epoch(state, ident, target_len=10**9, rng=rng,
                                    max_runs=rho)[1] for _ in range(200)]
        means.append(float(np.mean(draws)))
    x = np.log(rhos)
    y = np.log(means)
    slope = float(np.polyfit(x, y, 1)[0])
    _report("6", 0.4 <= slope <= 0.6,
            f"mean agents/epoch {['%.0f' % m for m in means]} for rho={rhos}; "
            f"log-log slope {slope:.3f} in [0.4, 0.6]")
    assert 0.4 <= slope <= 0.6


# ---------------------------------------------------------------------------
# criterion 7: heuristics change no statistical outcome


@pytest.mark.parametrize("scenario", SCENARIOS, ids=[s[0] for s in SCENARIOS])
def test_criterion_7_heuristic_neutrality(scenario):
    label, protocol, initial, horizon, seed = scenario
    exact = exact_distribution(protocol, tuple(initial), horizon)
    worst = 0.0
    for renaming in (False, True):
        for partitioning in (False, True):
            for skipping in (False, True):
                heur = Heuristics(renaming=renaming, partitioning=partitioning,
                                  skipping=skipping)
                for sim in ("batched", "multibatched"):
                    outs = simulate_many(sim, protocol, initial, horizon,
                                         seed + 1000 * (4 * renaming +
                                                        2 * partitioning +
                                                        skipping),
                                         REPS, heuristics=heur,
                                         threads=THREADS)
                    tv, p = compare_to_exact([tuple(r) for r in outs], exact)
                    worst = max(worst, tv)
                    assert tv < TV_BUDGET, (
                        f"{sim} {label} flags r={renaming} p={partitioning} "
                        f"s={skipping}: TV={tv:.5f}")
                    assert p > CHI_SIG
    _report("7", True, f"{label}: 8 flag combos x 2 simulators, "
                       f"worst TV={worst:.5f} (budget {TV_BUDGET})")


# ---------------------------------------------------------------------------
# criterion 8: memory footprint


def _peak_during(fn):
    tracemalloc.start()
    fn()
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    return peak


def test_criterion_8_memory_contract():
    q = 64
    proto = random_two_way(q, 5)
    steps = 1 << 15

    def batched_run(n):
        counts = np.full(q, n // q, dtype=np.int64)
        counts[0] += n - counts.sum()
        return lambda: simulate_batched(proto, counts, steps, seed=1,
                                        mode="multibatched")

    # warm: JIT compilation and run-length table caches stay off the books
    for n in (1 << 20, 1 << 24):
        batched_run(n)()
    peaks = {n: _peak_during(batched_run(n)) for n in (1 << 20, 1 << 24)}

    le = leader_election()

    def seq_array_run(n):
        return lambda: simulate_sequential(le, [n // 2, n - n // 2], 1024,
                                           seed=1, backend="array")

    seq_array_run(1 << 20)()
    array_peaks = {n: _peak_during(seq_array_run(n)) for n in (1 << 20, 1 << 24)}

    mib = 1024 * 1024
    batched_small = peaks[1 << 24] < mib
    batched_flat = max(peaks.values()) <= 2 * min(peaks.values())
    array_linear = array_peaks[1 << 24] >= 8 * array_peaks[1 << 20]
    ok = batched_small and batched_flat and array_linear
    _report("8", ok,
            f"multibatched peak {peaks[1 << 24] / 1024:.0f} KiB at n=2^24 "
            f"(< 1 MiB), {peaks[1 << 20] / 1024:.0f} KiB at n=2^20; "
            f"seq-array {array_peaks[1 << 20] / mib:.0f} -> "
            f"{array_peaks[1 << 24] / mib:.0f} MiB")
    assert batched_small, f"peak {peaks[1 << 24]} bytes"
    assert batched_flat, f"peaks {peaks}"
    assert array_linear, f"peaks {array_peaks}"
