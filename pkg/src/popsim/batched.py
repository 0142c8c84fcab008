"""Batched simulation: collision-free runs processed as interaction matrices.

One batch samples the length of a collision-free run, sorts its interactions
by state pair into a q x q matrix via nested hypergeometric draws, applies
all of them at once, and plants one collision to end the run.  The multi-run
variant strings several runs into an epoch, tracking agents that are
scheduled but not yet evaluated (delayed) only by count and materializing
them lazily; a single matrix step at the end of the epoch settles them.

Run lengths are drawn from the ordered-pair variant of the run-length law
(draws arrive as initiator/responder pairs that never self-interact), which
is what makes these simulators agree exactly with sequential stepping, not
just asymptotically.

Configurations live in binary-tree urns, so one simulation allocates
O(q^2 + log n) state and never anything proportional to n.

Both simulators land exactly on the requested interaction count: a final
batch that would overshoot is truncated to its first m pairs, which is a
legal prefix of the run, and the epoch is settled early.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from numba import njit

from .protocols import (
    Protocol,
    build_partition,
    checked_batch_apply,
    detect_skips,
)
from .rng import RngStream, derive_seed, randbelow, seed_state
from .runlength import run_length_table, sample_runlen_kernel
from .sequential import Heuristics, SimConfig, SimResult
from .urns import BstUrn, bst_build, bst_sample_remove, bst_update
from .variates import hyper_kernel, mvhyper_kernel

MODES = ("batched", "multibatched")


# ---------------------------------------------------------------------------
# per-protocol category structure (partitioning / skipping / renaming)


class CategoryStructure(NamedTuple):
    """CSR layout of per-row responder categories, in visit order.

    Row i's categories are cat ids in row_start[i]:row_start[i+1] of
    cat_order; category c's member states are members[member_start[c]:
    member_start[c+1]].  Categories and members are kept sorted by
    decreasing population when renaming is on.
    """

    order: np.ndarray         # state visit permutation (pi)
    row_start: np.ndarray     # q+1
    cat_order: np.ndarray     # ncats
    member_start: np.ndarray  # ncats+1
    members: np.ndarray       # q*q (each row's categories cover all states)
    cat_pop: np.ndarray       # ncats scratch


def build_categories(protocol: Protocol, heuristics: Heuristics) -> CategoryStructure:
    q = protocol.q
    rows: list[list[list[int]]] = []
    if protocol.deterministic and protocol.one_way and heuristics.partitioning:
        for groups in build_partition(protocol):
            rows.append([members for _, members in groups])
    elif protocol.deterministic and not protocol.one_way and heuristics.skipping:
        skips = detect_skips(protocol)
        for i in range(q):
            cell = [j for j in range(q) if (i, j) in skips]
            singles = [[j] for j in range(q) if (i, j) not in skips]
            cats = ([cell] if cell else []) + singles
            rows.append(cats)
    else:
        rows = [[[j] for j in range(q)] for _ in range(q)]

    ncats = sum(len(r) for r in rows)
    row_start = np.zeros(q + 1, dtype=np.int64)
    member_start = np.zeros(ncats + 1, dtype=np.int64)
    members = np.empty(q * q, dtype=np.int64)
    cat_order = np.arange(ncats, dtype=np.int64)
    c = 0
    mpos = 0
    for i, cats in enumerate(rows):
        row_start[i + 1] = row_start[i] + len(cats)
        for cat in cats:
            for j in cat:
                members[mpos] = j
                mpos += 1
            member_start[c + 1] = mpos
            c += 1
    return CategoryStructure(
        order=np.arange(q, dtype=np.int64),
        row_start=row_start,
        cat_order=cat_order,
        member_start=member_start,
        members=members,
        cat_pop=np.zeros(ncats, dtype=np.int64),
    )


def clone_categories(cats: CategoryStructure) -> CategoryStructure:
    return CategoryStructure(*(a.copy() for a in cats))


@njit(cache=True)
def _sort_desc(ids, lo, hi, keys):
    """Insertion-sort ids[lo:hi] by keys desc, ties by ascending id."""
    for x in range(lo + 1, hi):
        key = ids[x]
        kc = keys[key]
        y = x - 1
        while y >= lo and (keys[ids[y]] < kc or (keys[ids[y]] == kc and ids[y] > key)):
            ids[y + 1] = ids[y]
            y -= 1
        ids[y + 1] = key


@njit(cache=True)
def refresh_categories(counts, order, row_start, cat_order, member_start,
                       members, cat_pop):
    """Re-sort the visit permutation, category order, and members by count."""
    q = order.shape[0]
    for s in range(q):
        order[s] = s
    _sort_desc(order, 0, q, counts)
    for c in range(cat_pop.shape[0]):
        m0 = member_start[c]
        m1 = member_start[c + 1]
        _sort_desc(members, m0, m1, counts)
        pop = 0
        for x in range(m0, m1):
            pop += counts[members[x]]
        cat_pop[c] = pop
    for i in range(q):
        _sort_desc(cat_order, row_start[i], row_start[i + 1], cat_pop)


# ---------------------------------------------------------------------------
# interaction-matrix sampling


@njit(cache=True)
def matrix_sample_kernel(state, counts, total, pairs, order, row_start,
                         cat_order, member_start, members, d, row_sums, work):
    """Sample the q x q interaction matrix for `pairs` interactions.

    Initiator row sums come from one multivariate hypergeometric pass over
    `counts`; each row's responders are then drawn from the shrinking
    remainder, category totals first (one variate per category, early stop),
    then split across member states.  Fills `d` and `row_sums`; `counts` is
    left untouched.
    """
    q = counts.shape[0]
    for s in range(q):
        work[s] = counts[s]
        row_sums[s] = 0
    for i in range(q * q):
        d[i] = 0
    mvhyper_kernel(state, work, total, pairs, order, row_sums)
    for s in range(q):
        work[s] -= row_sums[s]
    rem_total = total - pairs
    for oi in range(q):
        i = order[oi]
        di = row_sums[i]
        if di == 0:
            continue
        rem = di
        avail = rem_total
        for ci in range(row_start[i], row_start[i + 1]):
            if rem == 0:
                break
            c = cat_order[ci]
            m0 = member_start[c]
            m1 = member_start[c + 1]
            pop = 0
            for x in range(m0, m1):
                pop += work[members[x]]
            if pop <= 0:
                continue
            if pop >= avail:
                g = rem
            else:
                g = hyper_kernel(state, pop, avail - pop, rem)
            grem = g
            gpop = pop
            for x in range(m0, m1):
                if grem == 0:
                    break
                s = members[x]
                cs = work[s]
                if cs <= 0:
                    continue
                if cs >= gpop:
                    xg = grem
                else:
                    xg = hyper_kernel(state, cs, gpop - cs, grem)
                if xg > 0:
                    d[i * q + s] += xg
                    work[s] -= xg
                    grem -= xg
                gpop -= cs
            rem -= g
            avail -= pop
        rem_total -= di
    return 0


@njit(cache=True)
def _apply_matrix_det(Ctree, Cp_tree, kleaves, q, d, row_sums, delta):
    """Move sampled interactions from C to C' through the transition table."""
    for i in range(q):
        di = row_sums[i]
        if di == 0:
            continue
        bst_update(Ctree, kleaves, i, -di)
        for j in range(q):
            x = d[i * q + j]
            if x == 0:
                continue
            bst_update(Ctree, kleaves, j, -x)
            bst_update(Cp_tree, kleaves, delta[i, j, 0], x)
            bst_update(Cp_tree, kleaves, delta[i, j, 1], x)


@njit(cache=True)
def _merge_into(Ctree, Cp_tree, kleaves, q):
    for s in range(q):
        x = Cp_tree[kleaves + s]
        if x != 0:
            bst_update(Cp_tree, kleaves, s, -x)
            bst_update(Ctree, kleaves, s, x)


# ---------------------------------------------------------------------------
# full-run kernels (deterministic protocols)


@njit(cache=True, nogil=True)
def batched_kernel(Ctree, Cp_tree, kleaves, q, n, delta, order, row_start,
                   cat_order, member_start, members, cat_pop, d, row_sums,
                   work, counts_buf, t, t_stop, n_stop, state, rl_lo, rl_hi,
                   rl_redges, refresh_every, batches_since):
    """Advance whole batches until t >= t_stop; exact landing on n_stop."""
    while t < t_stop:
        l = sample_runlen_kernel(state, n, 0, True, rl_lo, rl_hi, rl_redges)
        half = l // 2
        for s in range(q):
            counts_buf[s] = Ctree[kleaves + s]
        if t + half + 1 > n_stop:
            m = n_stop - t
            matrix_sample_kernel(state, counts_buf, n, m, order, row_start,
                                 cat_order, member_start, members, d,
                                 row_sums, work)
            _apply_matrix_det(Ctree, Cp_tree, kleaves, q, d, row_sums, delta)
            _merge_into(Ctree, Cp_tree, kleaves, q)
            t = n_stop
            break
        matrix_sample_kernel(state, counts_buf, n, half, order, row_start,
                             cat_order, member_start, members, d, row_sums,
                             work)
        _apply_matrix_det(Ctree, Cp_tree, kleaves, q, d, row_sums, delta)
        cp_total = 2 * half
        if l % 2 == 0:
            c1 = bst_sample_remove(Cp_tree, kleaves, cp_total, state)
            _merge_into(Ctree, Cp_tree, kleaves, q)
            c2 = bst_sample_remove(Ctree, kleaves, n - 1, state)
        else:
            c1 = bst_sample_remove(Ctree, kleaves, n - 2 * half, state)
            c2 = bst_sample_remove(Cp_tree, kleaves, cp_total, state)
            _merge_into(Ctree, Cp_tree, kleaves, q)
        bst_update(Ctree, kleaves, delta[c1, c2, 0], 1)
        bst_update(Ctree, kleaves, delta[c1, c2, 1], 1)
        t += half + 1
        if refresh_every > 0:
            batches_since += 1
            if batches_since >= refresh_every:
                batches_since = 0
                for s in range(q):
                    counts_buf[s] = Ctree[kleaves + s]
                refresh_categories(counts_buf, order, row_start, cat_order,
                                   member_start, members, cat_pop)
    return t, batches_since


@njit(cache=True, nogil=True)
def multibatched_kernel(Ctree, Cp_tree, kleaves, q, n, delta, order, row_start,
                        cat_order, member_start, members, cat_pop, d, row_sums,
                        work, counts_buf, t, t_stop, n_stop, state, rl_lo,
                        rl_hi, rl_redges, target_len, refresh_every,
                        epochs_since, max_epochs):
    """Advance whole epochs until t >= t_stop (or max_epochs elapse)."""
    epochs = 0
    while t < t_stop:
        if max_epochs > 0 and epochs >= max_epochs:
            break
        T = np.int64(0)
        cp_total = np.int64(0)
        c_total = np.int64(n)
        epoch_inter = np.int64(0)
        landed = False
        while True:
            r = cp_total + T
            l = sample_runlen_kernel(state, n, r, True, rl_lo, rl_hi, rl_redges)
            half = l // 2
            if t + half + 1 > n_stop:
                pairs = T // 2 + (n_stop - t)
                if pairs > 0:
                    for s in range(q):
                        counts_buf[s] = Ctree[kleaves + s]
                    matrix_sample_kernel(state, counts_buf, c_total, pairs,
                                         order, row_start, cat_order,
                                         member_start, members, d, row_sums,
                                         work)
                    _apply_matrix_det(Ctree, Cp_tree, kleaves, q, d, row_sums,
                                      delta)
                t = n_stop
                landed = True
                break
            T += 2 * half
            if l % 2 == 1:
                # the run's odd agent is a fresh initiator; the collider is a
                # responder, uniform over the other seen agents
                c1 = bst_sample_remove(Ctree, kleaves, c_total, state)
                c_total -= 1
                pick = randbelow(state, cp_total + T)
                if pick < cp_total:
                    c2 = bst_sample_remove(Cp_tree, kleaves, cp_total, state)
                    cp_total -= 1
                else:
                    a = bst_sample_remove(Ctree, kleaves, c_total, state)
                    c_total -= 1
                    b = bst_sample_remove(Ctree, kleaves, c_total, state)
                    c_total -= 1
                    if randbelow(state, 2) == 0:
                        a2 = delta[a, b, 0]
                        b2 = delta[a, b, 1]
                    else:
                        b2 = delta[b, a, 0]
                        a2 = delta[b, a, 1]
                    bst_update(Cp_tree, kleaves, b2, 1)
                    cp_total += 1
                    T -= 2
                    c2 = a2
                bst_update(Cp_tree, kleaves, delta[c1, c2, 0], 1)
                bst_update(Cp_tree, kleaves, delta[c1, c2, 1], 1)
                cp_total += 2
            else:
                # the collider is an initiator, uniform over all seen agents;
                # its responder is uniform over everyone else
                pick = randbelow(state, cp_total + T)
                if pick < cp_total:
                    c1 = bst_sample_remove(Cp_tree, kleaves, cp_total, state)
                    cp_total -= 1
                else:
                    a = bst_sample_remove(Ctree, kleaves, c_total, state)
                    c_total -= 1
                    b = bst_sample_remove(Ctree, kleaves, c_total, state)
                    c_total -= 1
                    if randbelow(state, 2) == 0:
                        a2 = delta[a, b, 0]
                        b2 = delta[a, b, 1]
                    else:
                        b2 = delta[b, a, 0]
                        a2 = delta[b, a, 1]
                    bst_update(Cp_tree, kleaves, b2, 1)
                    cp_total += 1
                    T -= 2
                    c1 = a2
                pick2 = randbelow(state, n - 1)
                if pick2 < cp_total:
                    c2 = bst_sample_remove(Cp_tree, kleaves, cp_total, state)
                    cp_total -= 1
                else:
                    size_before = c_total
                    c2 = bst_sample_remove(Ctree, kleaves, c_total, state)
                    c_total -= 1
                    pick3 = randbelow(state, size_before)
                    if pick3 < T:
                        # the partner is delayed: settle its pending
                        # interaction first, then it collides
                        b = bst_sample_remove(Ctree, kleaves, c_total, state)
                        c_total -= 1
                        if randbelow(state, 2) == 0:
                            c2p = delta[c2, b, 0]
                            b2 = delta[c2, b, 1]
                        else:
                            b2 = delta[b, c2, 0]
                            c2p = delta[b, c2, 1]
                        bst_update(Cp_tree, kleaves, b2, 1)
                        cp_total += 1
                        T -= 2
                        c2 = c2p
                bst_update(Cp_tree, kleaves, delta[c1, c2, 0], 1)
                bst_update(Cp_tree, kleaves, delta[c1, c2, 1], 1)
                cp_total += 2
            t += half + 1
            epoch_inter += half + 1
            if epoch_inter >= target_len or t >= n_stop:
                break
        if not landed and T > 0:
            for s in range(q):
                counts_buf[s] = Ctree[kleaves + s]
            matrix_sample_kernel(state, counts_buf, c_total, T // 2, order,
                                 row_start, cat_order, member_start, members,
                                 d, row_sums, work)
            _apply_matrix_det(Ctree, Cp_tree, kleaves, q, d, row_sums, delta)
        _merge_into(Ctree, Cp_tree, kleaves, q)
        epochs += 1
        if refresh_every > 0:
            epochs_since += 1
            if epochs_since >= refresh_every:
                epochs_since = 0
                for s in range(q):
                    counts_buf[s] = Ctree[kleaves + s]
                refresh_categories(counts_buf, order, row_start, cat_order,
                                   member_start, members, cat_pop)
    return t, epochs, epochs_since


@njit(cache=True, nogil=True)
def _batched_repeat(counts0, delta, steps, master_seed, rep_lo, rep_hi, out,
                    multibatched, target_len, order0, row_start, cat_order0,
                    member_start, members0, cat_pop, rl_lo, rl_hi, rl_redges,
                    refresh_every):
    q = counts0.shape[0]
    n = np.int64(counts0.sum())
    kleaves = 1
    while kleaves < q:
        kleaves *= 2
    Ctree = np.zeros(2 * kleaves, dtype=np.int64)
    Cp_tree = np.zeros(2 * kleaves, dtype=np.int64)
    d = np.zeros(q * q, dtype=np.int64)
    row_sums = np.zeros(q, dtype=np.int64)
    work = np.zeros(q, dtype=np.int64)
    counts_buf = np.zeros(q, dtype=np.int64)
    order = order0.copy()
    cat_order = cat_order0.copy()
    members = members0.copy()
    state = np.empty(4, dtype=np.uint64)
    for rep in range(rep_lo, rep_hi):
        seed_state(state, derive_seed(np.uint64(master_seed), np.uint64(rep)))
        bst_build(Ctree, kleaves, counts0)
        for x in range(2 * kleaves):
            Cp_tree[x] = 0
        order[:] = order0
        cat_order[:] = cat_order0
        members[:] = members0
        if multibatched:
            multibatched_kernel(Ctree, Cp_tree, kleaves, q, n, delta, order,
                                row_start, cat_order, member_start, members,
                                cat_pop, d, row_sums, work, counts_buf,
                                np.int64(0), steps, steps, state, rl_lo,
                                rl_hi, rl_redges, target_len, refresh_every,
                                np.int64(0), np.int64(0))
        else:
            batched_kernel(Ctree, Cp_tree, kleaves, q, n, delta, order,
                           row_start, cat_order, member_start, members,
                           cat_pop, d, row_sums, work, counts_buf,
                           np.int64(0), steps, steps, state, rl_lo, rl_hi,
                           rl_redges, refresh_every, np.int64(0))
        for s in range(q):
            out[rep - rep_lo, s] = Ctree[kleaves + s]


# ---------------------------------------------------------------------------
# object-level path (randomized protocols; also the reference for kernels)


def sample_interaction_matrix(counts, half_len: int, rng: RngStream,
                              protocol: Protocol | None = None,
                              heuristics: Heuristics | None = None,
                              categories: CategoryStructure | None = None) -> np.ndarray:
    """Sample the q x q matrix of state-pair interaction counts.

    `half_len` interactions draw 2 * half_len distinct agents without
    replacement from `counts` (initiators first, then responders).
    """
    counts = np.asarray(counts, dtype=np.int64)
    total = int(counts.sum())
    if 2 * half_len > total:
        raise ValueError(f"cannot draw {2 * half_len} agents from {total}")
    q = counts.shape[0]
    if categories is None:
        if protocol is None:
            protocol = Protocol(q, "anonymous", None)
        categories = build_categories(protocol, heuristics or Heuristics())
    d = np.zeros(q * q, dtype=np.int64)
    row_sums = np.zeros(q, dtype=np.int64)
    work = np.zeros(q, dtype=np.int64)
    matrix_sample_kernel(rng.state, counts, np.int64(total), np.int64(half_len),
                         categories.order, categories.row_start,
                         categories.cat_order, categories.member_start,
                         categories.members, d, row_sums, work)
    return d.reshape(q, q)


def _apply_matrix_protocol(C: BstUrn, Cp: BstUrn, d: np.ndarray, protocol: Protocol,
                           rng: RngStream) -> None:
    q = protocol.q
    for i in range(q):
        for j in range(q):
            x = int(d[i, j])
            if x == 0:
                continue
            C.remove(i, x)
            C.remove(j, x)
            checked_batch_apply(protocol, i, j, x,
                                lambda s, c: Cp.add(s, c), rng)


def batched_step(C: BstUrn, protocol: Protocol, rng: RngStream,
                 categories: CategoryStructure | None = None,
                 remaining: int | None = None) -> int:
    """One batch of the single-run simulator; returns interactions advanced.

    If `remaining` is given and the batch would overshoot it, only the first
    `remaining` pairs of the run are simulated (no collision is planted) so
    the caller lands exactly on its interaction budget.
    """
    n = C.total()
    if n < 2:
        raise ValueError("need at least two agents")
    if categories is None:
        categories = build_categories(protocol, Heuristics())
    lo, hi, redges = run_length_table(n, ordered_pairs=True)
    l = int(sample_runlen_kernel(rng.state, np.int64(n), np.int64(0), True,
                                 lo, hi, redges))
    half = l // 2
    Cp = BstUrn(np.zeros(protocol.q, dtype=np.int64))
    if remaining is not None and half + 1 > remaining:
        m = remaining
        d = sample_interaction_matrix(C.counts_vector(), m, rng,
                                      categories=categories)
        _apply_matrix_protocol(C, Cp, d, protocol, rng)
        _merge_urns(C, Cp)
        return m
    d = sample_interaction_matrix(C.counts_vector(), half, rng,
                                  categories=categories)
    _apply_matrix_protocol(C, Cp, d, protocol, rng)
    if l % 2 == 0:
        c1 = Cp.sample_without_replacement(rng)
        _merge_urns(C, Cp)
        c2 = C.sample_without_replacement(rng)
    else:
        c1 = C.sample_without_replacement(rng)
        c2 = Cp.sample_without_replacement(rng)
        _merge_urns(C, Cp)
    o1, o2 = protocol.apply(c1, c2, rng)
    C.add(o1)
    C.add(o2)
    return half + 1


def _merge_urns(C: BstUrn, Cp: BstUrn) -> None:
    for s in range(Cp.q):
        x = Cp.count(s)
        if x:
            Cp.remove(s, x)
            C.add(s, x)


@dataclass
class EpochState:
    """Multi-run bookkeeping: C holds untouched plus delayed agents, Cp holds
    updated agents, `delayed` counts scheduled-but-unevaluated agents."""

    C: BstUrn
    Cp: BstUrn
    n: int
    delayed: int = 0
    interactions: int = 0

    @property
    def seen(self) -> int:
        return self.Cp.total() + self.delayed

    def check(self) -> None:
        assert self.C.total() + self.Cp.total() == self.n
        assert self.delayed % 2 == 0
        assert self.delayed <= self.C.total()


def _materialize_delayed(state: EpochState, protocol: Protocol, rng: RngStream) -> int:
    """Settle the pending interaction of one uniformly chosen delayed agent;
    returns that agent's updated state (its partner lands in Cp)."""
    a = state.C.sample_without_replacement(rng)
    b = state.C.sample_without_replacement(rng)
    if rng.below(2) == 0:
        a2, b2 = protocol.apply(a, b, rng)
    else:
        b2, a2 = protocol.apply(b, a, rng)
    state.Cp.add(b2)
    state.delayed -= 2
    return a2


def multibatched_epoch(state: EpochState, protocol: Protocol, target_len: int,
                       rng: RngStream, categories: CategoryStructure | None = None,
                       max_runs: int | None = None,
                       remaining: int | None = None):
    """Run one epoch; returns (interactions advanced, agents drawn in runs).

    Runs are added until their interactions reach `target_len` (or
    `max_runs`), each followed by one planted collision; a single matrix
    step settles the delayed pairs and Cp merges back into C.
    """
    if target_len < 1:
        raise ValueError("target_len must be at least 1")
    if state.delayed != 0 or state.Cp.total() != 0:
        raise ValueError("epoch must start quiescent")
    n = state.n
    if n < 2:
        raise ValueError("need at least two agents")
    if categories is None:
        categories = build_categories(protocol, Heuristics())
    lo, hi, redges = run_length_table(n, ordered_pairs=True)
    advanced = 0
    agents_drawn = 0
    runs = 0
    landed = False
    while True:
        r = state.seen
        l = int(sample_runlen_kernel(rng.state, np.int64(n), np.int64(r), True,
                                     lo, hi, redges))
        half = l // 2
        if remaining is not None and advanced + half + 1 > remaining:
            pairs = state.delayed // 2 + (remaining - advanced)
            if pairs > 0:
                d = sample_interaction_matrix(state.C.counts_vector(), pairs,
                                              rng, categories=categories)
                _apply_matrix_protocol(state.C, state.Cp, d, protocol, rng)
            state.delayed = 0
            advanced = remaining
            landed = True
            break
        agents_drawn += l
        state.delayed += 2 * half
        if l % 2 == 1:
            c1 = state.C.sample_without_replacement(rng)
            pick = rng.below(state.seen)
            if pick < state.Cp.total():
                c2 = state.Cp.sample_without_replacement(rng)
            else:
                c2 = _materialize_delayed(state, protocol, rng)
            o1, o2 = protocol.apply(c1, c2, rng)
            state.Cp.add(o1)
            state.Cp.add(o2)
        else:
            pick = rng.below(state.seen)
            if pick < state.Cp.total():
                c1 = state.Cp.sample_without_replacement(rng)
            else:
                c1 = _materialize_delayed(state, protocol, rng)
            pick2 = rng.below(n - 1)
            if pick2 < state.Cp.total():
                c2 = state.Cp.sample_without_replacement(rng)
            else:
                size_before = state.C.total()
                c2 = state.C.sample_without_replacement(rng)
                if rng.below(size_before) < state.delayed:
                    b = state.C.sample_without_replacement(rng)
                    if rng.below(2) == 0:
                        c2p, b2 = protocol.apply(c2, b, rng)
                    else:
                        b2, c2p = protocol.apply(b, c2, rng)
                    state.Cp.add(b2)
                    state.delayed -= 2
                    c2 = c2p
            o1, o2 = protocol.apply(c1, c2, rng)
            state.Cp.add(o1)
            state.Cp.add(o2)
        advanced += half + 1
        runs += 1
        if advanced >= target_len:
            break
        if max_runs is not None and runs >= max_runs:
            break
        if remaining is not None and advanced >= remaining:
            break
    if not landed and state.delayed > 0:
        d = sample_interaction_matrix(state.C.counts_vector(),
                                      state.delayed // 2, rng,
                                      categories=categories)
        _apply_matrix_protocol(state.C, state.Cp, d, protocol, rng)
        state.delayed = 0
    _merge_urns(state.C, state.Cp)
    state.interactions += advanced
    return advanced, agents_drawn


# ---------------------------------------------------------------------------
# epoch length controller


class EpochLengthController:
    """Hill-climbs the epoch length over {0.9 T, T, 1.1 T} by throughput.

    Candidates are measured center, up, down; after all three, the best
    becomes the new center.  Exact ties prefer the current center.
    """

    def __init__(self, initial_target: int, min_target: int = 1):
        self.center = max(int(initial_target), min_target)
        self.min_target = min_target
        self._phase = 0
        self._scores = [0.0, 0.0, 0.0]

    def _candidates(self) -> list[int]:
        c = self.center
        up = max(c + 1, int(round(c * 1.1)))
        down = max(self.min_target, min(c - 1, int(round(c * 0.9))))
        return [c, up, down]

    def current_target(self) -> int:
        return self._candidates()[self._phase]

    def observe(self, throughput: float) -> int:
        """Record the throughput of the current candidate; returns the next
        target to run at."""
        if throughput <= 0:
            raise ValueError("throughput must be positive")
        self._scores[self._phase] = throughput
        self._phase += 1
        if self._phase == 3:
            cands = self._candidates()
            best = max(range(3), key=lambda i: (self._scores[i], -i))
            self.center = cands[best]
            self._phase = 0
        return self.current_target()


def tune_epoch_length(controller: EpochLengthController, throughput: float) -> int:
    """Feed one throughput measurement; returns the next epoch length."""
    return controller.observe(throughput)


# ---------------------------------------------------------------------------
# drivers


def _refresh_interval(q: int, heur: Heuristics) -> int:
    if not heur.renaming:
        return 0
    return max(1, int(np.ceil(np.log2(max(q, 2)))))


def default_target_len(n: int) -> int:
    return max(1, int(math.isqrt(n)))


def simulate_batched(protocol: Protocol, initial, steps: int, seed: int,
                     mode: str = "batched",
                     heuristics: Heuristics | None = None,
                     snapshot_every: int | None = None,
                     sink: Callable | None = None,
                     target_len: int | None = None) -> SimResult:
    """Run `steps` interactions with a batched simulator, landing exactly.

    Snapshots are delivered at epoch/batch boundaries: the first boundary at
    or past each multiple of `snapshot_every`, plus t=0 and t=steps.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    heur = heuristics or Heuristics()
    initial = np.asarray(initial, dtype=np.int64)
    if initial.shape[0] != protocol.q:
        raise ValueError("initial configuration length must equal state count")
    n = int(initial.sum())
    if steps > 0 and n < 2:
        raise ValueError("need at least two agents to interact")
    q = protocol.q
    rng = RngStream(seed)
    cats = build_categories(protocol, heur)
    refresh_every = _refresh_interval(q, heur)
    if heur.renaming:
        refresh_categories(initial, cats.order, cats.row_start, cats.cat_order,
                           cats.member_start, cats.members, cats.cat_pop)

    marks = sorted({steps} | (
        set(range(0, steps + 1, snapshot_every)) if snapshot_every else set()))
    if sink is not None:
        sink(0, initial.copy())
    loop_seconds = 0.0
    t = 0

    controller = None
    target = target_len if target_len is not None else default_target_len(n)
    if mode == "multibatched" and heur.controller and steps > 0:
        controller = EpochLengthController(target)
        target = controller.current_target()

    if protocol.deterministic and steps > 0:
        C = BstUrn(initial)
        Cp = BstUrn(np.zeros(q, dtype=np.int64))
        d = np.zeros(q * q, dtype=np.int64)
        row_sums = np.zeros(q, dtype=np.int64)
        work = np.zeros(q, dtype=np.int64)
        counts_buf = np.zeros(q, dtype=np.int64)
        rl_lo, rl_hi, rl_redges = run_length_table(n, ordered_pairs=True)
        since = np.int64(0)
        kleaves = np.int64(C.kleaves)
        delta = protocol.table
        last_sunk = 0
        for mark in marks:
            while t < mark:
                t_before = t
                start = time.perf_counter()
                if mode == "batched":
                    t, since = batched_kernel(
                        C.tree, Cp.tree, kleaves, q, np.int64(n), delta,
                        cats.order, cats.row_start, cats.cat_order,
                        cats.member_start, cats.members, cats.cat_pop, d,
                        row_sums, work, counts_buf, np.int64(t),
                        np.int64(mark), np.int64(steps), rng.state, rl_lo,
                        rl_hi, rl_redges, np.int64(refresh_every), since)
                else:
                    max_epochs = 8 if controller is not None else 0
                    t, epochs, since = multibatched_kernel(
                        C.tree, Cp.tree, kleaves, q, np.int64(n), delta,
                        cats.order, cats.row_start, cats.cat_order,
                        cats.member_start, cats.members, cats.cat_pop, d,
                        row_sums, work, counts_buf, np.int64(t),
                        np.int64(mark), np.int64(steps), rng.state, rl_lo,
                        rl_hi, rl_redges, np.int64(target),
                        np.int64(refresh_every), since, np.int64(max_epochs))
                elapsed = time.perf_counter() - start
                loop_seconds += elapsed
                if controller is not None and t > t_before and elapsed > 0:
                    target = controller.observe((t - t_before) / elapsed)
            if sink is not None and t != last_sunk:
                sink(t, C.counts_vector())
                last_sunk = t
        return SimResult(C.counts_vector(), t, loop_seconds)

    # object path: randomized protocols (or zero steps)
    C = BstUrn(initial)
    if steps == 0:
        return SimResult(C.counts_vector(), 0, 0.0)
    state = EpochState(C=C, Cp=BstUrn(np.zeros(q, dtype=np.int64)), n=n)
    since = 0
    last_sunk = 0
    for mark in marks:
        while t < mark:
            start = time.perf_counter()
            if mode == "batched":
                t += batched_step(C, protocol, rng, categories=cats,
                                  remaining=steps - t)
            else:
                advanced, _ = multibatched_epoch(state, protocol, target, rng,
                                                 categories=cats,
                                                 remaining=steps - t)
                t += advanced
            loop_seconds += time.perf_counter() - start
            if refresh_every > 0:
                since += 1
                if since >= refresh_every:
                    since = 0
                    refresh_categories(C.counts_vector(), cats.order,
                                       cats.row_start, cats.cat_order,
                                       cats.member_start, cats.members,
                                       cats.cat_pop)
        if sink is not None and t != last_sunk:
            sink(t, C.counts_vector())
            last_sunk = t
    return SimResult(C.counts_vector(), t, loop_seconds)


def run_batched(config: SimConfig, protocol: Protocol, initial,
                mode: str = "batched", sink: Callable | None = None) -> np.ndarray:
    """Config-driven entry point: advance to exactly config.steps interactions."""
    initial = np.asarray(initial, dtype=np.int64)
    if int(initial.sum()) != config.n:
        raise ValueError("initial configuration does not sum to n")
    result = simulate_batched(protocol, initial, config.steps, config.seed,
                              mode, config.heuristics, config.snapshot_every,
                              sink)
    return result.counts


def simulate_batched_many(protocol: Protocol, initial, steps: int,
                          master_seed: int, reps: int, mode: str = "batched",
                          heuristics: Heuristics | None = None,
                          rep_offset: int = 0,
                          target_len: int | None = None) -> np.ndarray:
    """Final configurations of `reps` independent batched runs."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    heur = heuristics or Heuristics()
    initial = np.asarray(initial, dtype=np.int64)
    n = int(initial.sum())
    q = protocol.q
    out = np.empty((reps, q), dtype=np.int64)
    if not protocol.deterministic:
        from .rng import spawn_seed

        for i in range(reps):
            res = simulate_batched(protocol, initial, steps,
                                   spawn_seed(master_seed, rep_offset + i),
                                   mode, heur, target_len=target_len)
            out[i] = res.counts
        return out
    cats = build_categories(protocol, heur)
    if heur.renaming:
        refresh_categories(initial, cats.order, cats.row_start, cats.cat_order,
                           cats.member_start, cats.members, cats.cat_pop)
    rl_lo, rl_hi, rl_redges = run_length_table(n, ordered_pairs=True)
    target = target_len if target_len is not None else default_target_len(n)
    _batched_repeat(initial, protocol.table, np.int64(steps),
                    np.uint64(master_seed), np.int64(rep_offset),
                    np.int64(rep_offset + reps), out, mode == "multibatched",
                    np.int64(target), cats.order, cats.row_start,
                    cats.cat_order, cats.member_start, cats.members,
                    cats.cat_pop, rl_lo, rl_hi, rl_redges,
                    np.int64(_refresh_interval(q, heur)))
    return out
