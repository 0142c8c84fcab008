"""Uniform entry points over the six simulators, plus verification drivers.

Simulator names: seq-array, seq-linear, seq-bst, seq-alias (sequential over
the four urn backends), batched, multibatched.  Run-level parallelism only:
repetitions are independent runs with seeds derived from (master seed, run
index), so serial and threaded execution produce identical per-run results.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import oracle
from .batched import simulate_batched, simulate_batched_many
from .protocols import Protocol
from .sequential import (
    Heuristics,
    SimResult,
    simulate_sequential,
    simulate_sequential_many,
)

SIMULATORS = ("seq-array", "seq-linear", "seq-bst", "seq-alias",
              "batched", "multibatched")


def simulate(simulator: str, protocol: Protocol, initial, steps: int, seed: int,
             heuristics: Heuristics | None = None,
             snapshot_every: int | None = None, sink=None,
             alias_undersized: bool = False) -> SimResult:
    """One run under the named simulator; returns counts, t, and loop time."""
    if simulator.startswith("seq-"):
        backend = simulator[4:]
        return simulate_sequential(protocol, initial, steps, seed, backend,
                                   heuristics, snapshot_every, sink,
                                   alias_undersized=alias_undersized)
    if simulator in ("batched", "multibatched"):
        return simulate_batched(protocol, initial, steps, seed, simulator,
                                heuristics, snapshot_every, sink)
    raise ValueError(f"unknown simulator {simulator!r}; choose from {SIMULATORS}")


def simulate_many(simulator: str, protocol: Protocol, initial, steps: int,
                  master_seed: int, reps: int,
                  heuristics: Heuristics | None = None, rep_offset: int = 0,
                  alias_undersized: bool = False, threads: int = 1) -> np.ndarray:
    """Final configurations of `reps` independent runs, one row per run.

    With `threads` > 1 the repetition range is split into contiguous chunks;
    every run keeps its derived seed, so the result equals the serial one.
    """
    if simulator.startswith("seq-"):
        backend = simulator[4:]

        def chunk(offset, count):
            return simulate_sequential_many(
                protocol, initial, steps, master_seed, count, backend,
                heuristics, rep_offset + offset, alias_undersized)
    elif simulator in ("batched", "multibatched"):

        def chunk(offset, count):
            return simulate_batched_many(protocol, initial, steps, master_seed,
                                         count, simulator, heuristics,
                                         rep_offset + offset)
    else:
        raise ValueError(f"unknown simulator {simulator!r}")

    if threads <= 1 or reps < 2 * threads:
        return chunk(0, reps)
    bounds = np.linspace(0, reps, threads + 1, dtype=int)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda se: chunk(se[0], se[1] - se[0]),
                              zip(bounds[:-1], bounds[1:])))
    return np.vstack(parts)


@dataclass
class VerifyReport:
    simulator: str
    reps: int
    total_variation: float
    tv_threshold: float
    p_value: float

    @property
    def passed(self) -> bool:
        return (self.total_variation <= self.tv_threshold
                and self.p_value >= 1e-3)


def verify_against_oracle(protocol: Protocol, initial, horizon: int,
                          reps: int, master_seed: int,
                          simulators=SIMULATORS,
                          heuristics: Heuristics | None = None,
                          threads: int = 1,
                          tv_threshold: float | None = None) -> list[VerifyReport]:
    """Compare each simulator's final-configuration histogram to the exact
    Markov-chain distribution; the miss budget scales with 1/sqrt(reps)."""
    exact = oracle.exact_distribution(protocol, initial, horizon)
    if tv_threshold is None:
        tv_threshold = max(0.005, 0.005 * math.sqrt(1e6 / max(reps, 1)))
    reports = []
    for sim in simulators:
        outs = simulate_many(sim, protocol, initial, horizon, master_seed,
                             reps, heuristics, alias_undersized=True,
                             threads=threads)
        tv, p = oracle.compare_to_exact([tuple(r) for r in outs], exact)
        reports.append(VerifyReport(sim, reps, tv, tv_threshold, p))
    return reports
