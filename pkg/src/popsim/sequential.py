"""Step-by-step sequential simulation over any urn backend.

Each interaction draws two agents without replacement (initiator first),
applies the transition, and reinserts the outputs, exactly N times.  For
deterministic protocols the whole loop runs inside numba kernels; randomized
protocols fall back to an object-level loop that consumes the random stream
in the same order, so both paths produce bit-identical runs whenever they
overlap.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from numba import njit

from .protocols import Protocol, renaming_permutation
from .rng import RngStream, derive_seed, randbelow, seed_state
from .urns import (
    AliasUrn,
    ArrayUrn,
    BstUrn,
    LinearUrn,
    alias_add,
    alias_rebuild,
    alias_sample_remove,
    bst_build,
    bst_sample_remove,
    bst_update,
    linear_sample,
    make_urn,
)

SNAPSHOT_BACKENDS = ("array", "linear", "bst", "alias")


@dataclass
class Heuristics:
    """Toggles for the optional speedups; semantics never change."""

    renaming: bool = True
    partitioning: bool = True
    skipping: bool = True
    controller: bool = False
    prefetch: bool = False
    prefetch_depth: int = 8

    @classmethod
    def from_names(cls, names) -> "Heuristics":
        h = cls(renaming=False, partitioning=False, skipping=False, controller=False)
        for raw in names:
            name = raw.strip()
            if not name:
                continue
            if not hasattr(h, name):
                raise ValueError(f"unknown heuristic {name!r}")
            setattr(h, name, True)
        return h

    def names(self):
        return [n for n in ("renaming", "partitioning", "skipping", "controller",
                            "prefetch") if getattr(self, n)]


@dataclass
class SimConfig:
    """Run parameters shared by the sequential and batched simulators."""

    n: int
    steps: int
    seed: int
    backend: str = "bst"
    snapshot_every: int | None = None
    heuristics: Heuristics = field(default_factory=Heuristics)
    alias_undersized: bool = False

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("population size must be non-negative")
        if self.steps < 0:
            raise ValueError("interaction budget must be non-negative")
        if self.snapshot_every is not None and self.snapshot_every < 1:
            raise ValueError("snapshot interval must be at least 1")


class SimResult(NamedTuple):
    counts: np.ndarray
    interactions: int
    loop_seconds: float


def _renaming_interval(q: int) -> int:
    return max(q * max(1, int(np.ceil(np.log2(max(q, 2))))), 1024)


# ---------------------------------------------------------------------------
# kernels (deterministic protocols)


@njit(cache=True, nogil=True)
def _seq_run_array(agents, n, delta, steps, state):
    for _ in range(steps):
        i = randbelow(state, n)
        a = agents[i]
        agents[i] = agents[n - 1]
        j = randbelow(state, n - 1)
        b = agents[j]
        agents[j] = agents[n - 2]
        agents[n - 2] = delta[a, b, 0]
        agents[n - 1] = delta[a, b, 1]


@njit(cache=True, nogil=True)
def _seq_run_array_grouped(agents, n, delta, steps, state, depth):
    """Array loop with draws grouped `depth` interactions ahead.

    The random stream and all outputs are identical to the plain loop; the
    grouping only front-loads index generation (lookahead/prefetch shape).
    """
    buf_i = np.empty(depth, dtype=np.int64)
    buf_j = np.empty(depth, dtype=np.int64)
    done = 0
    while done < steps:
        block = depth if steps - done > depth else steps - done
        for t in range(block):
            buf_i[t] = randbelow(state, n)
            buf_j[t] = randbelow(state, n - 1)
        for t in range(block):
            i = buf_i[t]
            a = agents[i]
            agents[i] = agents[n - 1]
            j = buf_j[t]
            b = agents[j]
            agents[j] = agents[n - 2]
            agents[n - 2] = delta[a, b, 0]
            agents[n - 1] = delta[a, b, 1]
        done += block


@njit(cache=True)
def _refresh_order(order, counts):
    """Sort states by decreasing count, ties by ascending id (stable)."""
    q = order.shape[0]
    for x in range(q):
        order[x] = x
    for x in range(1, q):
        key = order[x]
        kc = counts[key]
        y = x - 1
        while y >= 0 and counts[order[y]] < kc:
            order[y + 1] = order[y]
            y -= 1
        order[y + 1] = key


@njit(cache=True, nogil=True)
def _seq_run_linear(counts, order, n, delta, steps, state, refresh_every):
    since = 0
    for _ in range(steps):
        a = linear_sample(counts, order, n, state)
        counts[a] -= 1
        b = linear_sample(counts, order, n - 1, state)
        counts[b] -= 1
        counts[delta[a, b, 0]] += 1
        counts[delta[a, b, 1]] += 1
        if refresh_every > 0:
            since += 1
            if since >= refresh_every:
                since = 0
                _refresh_order(order, counts)


@njit(cache=True, nogil=True)
def _seq_run_bst(tree, kleaves, n, delta, steps, state):
    for _ in range(steps):
        a = bst_sample_remove(tree, kleaves, n, state)
        b = bst_sample_remove(tree, kleaves, n - 1, state)
        bst_update(tree, kleaves, delta[a, b, 0], 1)
        bst_update(tree, kleaves, delta[a, b, 1], 1)


@njit(cache=True, nogil=True)
def _seq_run_alias(F, S, A, counts, meta, alias_rows, alias_start, delta, steps,
                   state, alpha, beta):
    for _ in range(steps):
        a = alias_sample_remove(F, S, A, counts, meta, alias_rows, alias_start,
                                state, alpha, beta)
        b = alias_sample_remove(F, S, A, counts, meta, alias_rows, alias_start,
                                state, alpha, beta)
        alias_add(F, S, A, counts, meta, alias_rows, alias_start,
                  delta[a, b, 0], 1, alpha, beta)
        alias_add(F, S, A, counts, meta, alias_rows, alias_start,
                  delta[a, b, 1], 1, alpha, beta)


# repeat drivers: same kernels, one fresh sub-stream per repetition


@njit(cache=True, nogil=True)
def _seq_repeat_array(counts0, delta, steps, master_seed, rep_lo, rep_hi, out):
    q = counts0.shape[0]
    n = np.int64(counts0.sum())
    agents = np.empty(n, dtype=np.int32)
    state = np.empty(4, dtype=np.uint64)
    for rep in range(rep_lo, rep_hi):
        seed_state(state, derive_seed(np.uint64(master_seed), np.uint64(rep)))
        pos = 0
        for s in range(q):
            for _ in range(counts0[s]):
                agents[pos] = s
                pos += 1
        _seq_run_array(agents, n, delta, steps, state)
        for s in range(q):
            out[rep - rep_lo, s] = 0
        for i in range(n):
            out[rep - rep_lo, agents[i]] += 1


@njit(cache=True, nogil=True)
def _seq_repeat_linear(counts0, delta, steps, master_seed, rep_lo, rep_hi, out,
                       refresh_every):
    q = counts0.shape[0]
    n = np.int64(counts0.sum())
    counts = np.empty(q, dtype=np.int64)
    order = np.empty(q, dtype=np.int64)
    state = np.empty(4, dtype=np.uint64)
    for rep in range(rep_lo, rep_hi):
        seed_state(state, derive_seed(np.uint64(master_seed), np.uint64(rep)))
        for s in range(q):
            counts[s] = counts0[s]
            order[s] = s
        _seq_run_linear(counts, order, n, delta, steps, state, refresh_every)
        for s in range(q):
            out[rep - rep_lo, s] = counts[s]


@njit(cache=True, nogil=True)
def _seq_repeat_bst(counts0, delta, steps, master_seed, rep_lo, rep_hi, out):
    q = counts0.shape[0]
    n = np.int64(counts0.sum())
    kleaves = 1
    while kleaves < q:
        kleaves *= 2
    tree = np.zeros(2 * kleaves, dtype=np.int64)
    state = np.empty(4, dtype=np.uint64)
    for rep in range(rep_lo, rep_hi):
        seed_state(state, derive_seed(np.uint64(master_seed), np.uint64(rep)))
        bst_build(tree, kleaves, counts0)
        _seq_run_bst(tree, kleaves, n, delta, steps, state)
        for s in range(q):
            out[rep - rep_lo, s] = tree[kleaves + s]


@njit(cache=True, nogil=True)
def _seq_repeat_alias(counts0, delta, steps, master_seed, rep_lo, rep_hi, out,
                      alpha, beta):
    q = counts0.shape[0]
    F = np.zeros(q, dtype=np.int64)
    S = np.zeros(q, dtype=np.int64)
    A = np.zeros(q, dtype=np.int64)
    counts = np.empty(q, dtype=np.int64)
    meta = np.zeros(6, dtype=np.int64)
    alias_rows = np.zeros(q, dtype=np.int64)
    alias_start = np.zeros(q + 1, dtype=np.int64)
    state = np.empty(4, dtype=np.uint64)
    for rep in range(rep_lo, rep_hi):
        seed_state(state, derive_seed(np.uint64(master_seed), np.uint64(rep)))
        for s in range(q):
            counts[s] = counts0[s]
        meta[:] = 0
        alias_rebuild(F, S, A, counts, meta, alias_rows, alias_start)
        _seq_run_alias(F, S, A, counts, meta, alias_rows, alias_start, delta,
                       steps, state, alpha, beta)
        for s in range(q):
            out[rep - rep_lo, s] = counts[s]


# ---------------------------------------------------------------------------
# drivers


def _snapshot_points(steps: int, every: int | None):
    points = {0, steps}
    if every is not None:
        points.update(range(0, steps + 1, every))
    return sorted(points)


def _build_urn(initial, backend: str, alias_undersized: bool):
    if backend == "alias":
        return AliasUrn(initial, allow_undersized=alias_undersized)
    return make_urn(initial, backend)


def _urn_counts(urn) -> np.ndarray:
    return urn.counts_vector()


def _kernel_segment(urn, delta, steps, state, heur: Heuristics, refresh_every):
    backend = urn.backend
    if backend == "array":
        if heur.prefetch:
            _seq_run_array_grouped(urn._agents, np.int64(urn.total()), delta,
                                   np.int64(steps), state,
                                   np.int64(max(1, heur.prefetch_depth)))
        else:
            _seq_run_array(urn._agents, np.int64(urn.total()), delta,
                           np.int64(steps), state)
        urn._counts = np.bincount(urn._agents, minlength=urn.q).astype(np.int64)
    elif backend == "linear":
        _seq_run_linear(urn._counts, urn._order, np.int64(urn.total()), delta,
                        np.int64(steps), state, np.int64(refresh_every))
    elif backend == "bst":
        _seq_run_bst(urn.tree, np.int64(urn.kleaves), np.int64(urn.total()),
                     delta, np.int64(steps), state)
    elif backend == "alias":
        _seq_run_alias(urn.F, urn.S, urn.A, urn._counts, urn.meta,
                       urn.alias_rows, urn.alias_start, delta, np.int64(steps),
                       state, urn.alpha, urn.beta)
    else:  # pragma: no cover
        raise ValueError(f"unknown backend {backend!r}")


def _python_segment(urn, protocol, steps, rng, heur, refresh_every, done_box):
    for _ in range(steps):
        a = urn.sample_without_replacement(rng)
        b = urn.sample_without_replacement(rng)
        a2, b2 = protocol.apply(a, b, rng)
        urn.add(a2)
        urn.add(b2)
        if urn.backend == "linear" and refresh_every > 0:
            done_box[0] += 1
            if done_box[0] >= refresh_every:
                done_box[0] = 0
                urn.set_order(renaming_permutation(urn.counts_vector()))


def simulate_sequential(protocol: Protocol, initial, steps: int, seed: int,
                        backend: str = "bst", heuristics: Heuristics | None = None,
                        snapshot_every: int | None = None,
                        sink: Callable | None = None,
                        alias_undersized: bool = False) -> SimResult:
    """Run `steps` interactions; returns final counts and pure loop time."""
    heur = heuristics or Heuristics()
    initial = np.asarray(initial, dtype=np.int64)
    if initial.shape[0] != protocol.q:
        raise ValueError("initial configuration length must equal state count")
    n = int(initial.sum())
    if steps > 0 and n < 2:
        raise ValueError("need at least two agents to interact")
    urn = _build_urn(initial, backend, alias_undersized)
    rng = RngStream(seed)
    refresh_every = _renaming_interval(protocol.q) if (
        backend == "linear" and heur.renaming) else 0

    points = _snapshot_points(steps, snapshot_every)
    fast = protocol.deterministic
    delta = protocol.table
    done_box = [0]
    t = 0
    loop_seconds = 0.0
    if sink is not None:
        sink(0, _urn_counts(urn))
    for target in points:
        if target == t:
            continue
        chunk = target - t
        start = time.perf_counter()
        if fast:
            _kernel_segment(urn, delta, chunk, rng.state, heur, refresh_every)
        else:
            _python_segment(urn, protocol, chunk, rng, heur, refresh_every, done_box)
        loop_seconds += time.perf_counter() - start
        t = target
        if sink is not None:
            sink(t, _urn_counts(urn))
    return SimResult(_urn_counts(urn), steps, loop_seconds)


def run_sequential(config: SimConfig, protocol: Protocol, initial,
                   sink: Callable | None = None) -> np.ndarray:
    """Config-driven entry point: execute exactly config.steps interactions."""
    initial = np.asarray(initial, dtype=np.int64)
    if int(initial.sum()) != config.n:
        raise ValueError("initial configuration does not sum to n")
    result = simulate_sequential(
        protocol, initial, config.steps, config.seed, config.backend,
        config.heuristics, config.snapshot_every, sink,
        alias_undersized=config.alias_undersized,
    )
    return result.counts


def simulate_sequential_many(protocol: Protocol, initial, steps: int,
                             master_seed: int, reps: int,
                             backend: str = "bst",
                             heuristics: Heuristics | None = None,
                             rep_offset: int = 0,
                             alias_undersized: bool = False) -> np.ndarray:
    """Final configurations of `reps` independent runs (row per run).

    Run `i` uses the sub-stream derived from (master_seed, rep_offset + i),
    identical to simulate_sequential with seed spawn_seed(master_seed, i).
    """
    heur = heuristics or Heuristics()
    initial = np.asarray(initial, dtype=np.int64)
    q = protocol.q
    out = np.empty((reps, q), dtype=np.int64)
    lo = rep_offset
    hi = rep_offset + reps
    if protocol.deterministic:
        delta = protocol.table
        seed = np.uint64(master_seed)
        if backend == "array":
            _seq_repeat_array(initial, delta, np.int64(steps), seed,
                              np.int64(lo), np.int64(hi), out)
        elif backend == "linear":
            refresh = _renaming_interval(q) if heur.renaming else 0
            _seq_repeat_linear(initial, delta, np.int64(steps), seed,
                               np.int64(lo), np.int64(hi), out, np.int64(refresh))
        elif backend == "bst":
            _seq_repeat_bst(initial, delta, np.int64(steps), seed,
                            np.int64(lo), np.int64(hi), out)
        elif backend == "alias":
            if not alias_undersized and 0 < initial.sum() < q * q:
                raise ValueError("alias backend needs n >= q**2 "
                                 "(or alias_undersized=True)")
            _seq_repeat_alias(initial, delta, np.int64(steps), seed,
                              np.int64(lo), np.int64(hi), out, 0.5, 2.0)
        else:
            raise ValueError(f"unknown backend {backend!r}")
        return out
    from .rng import spawn_seed

    for i in range(reps):
        res = simulate_sequential(protocol, initial, steps,
                                  spawn_seed(master_seed, lo + i), backend,
                                  heur, alias_undersized=alias_undersized)
        out[i] = res.counts
    return out
