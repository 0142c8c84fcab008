"""Urn data structures over a multiset of agent states.

All four backends support uniform sampling with and without replacement,
insertion, and bulk count updates, with different cost/memory trade-offs:

* ``ArrayUrn``    one word per agent, O(1) ops, Theta(n) memory
* ``LinearUrn``   count vector with linear-scan sampling, O(q) ops
* ``BstUrn``      implicit complete binary tree over the counts, O(log q) ops
* ``AliasUrn``    dynamic alias table, expected O(1) ops, O(q) rebuilds

The numba kernels below are the single implementation of each operation; the
classes are thin owners of the underlying arrays, and the simulator loops
call the same kernels.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .rng import RngStream, randbelow

# meta slots shared by the alias kernels
_TOTAL, _RMIN, _RMAX, _REBUILDS, _TRIALS, _EMITS = 0, 1, 2, 3, 4, 5


# ---------------------------------------------------------------------------
# array backend


@njit(cache=True, inline="always")
def array_sample(agents, size, state):
    return agents[randbelow(state, size)]


@njit(cache=True, inline="always")
def array_sample_remove(agents, size, state):
    """Swap-with-last removal; returns the sampled state, caller shrinks size."""
    i = randbelow(state, size)
    s = agents[i]
    agents[i] = agents[size - 1]
    return s


@njit(cache=True)
def array_fill(agents, counts):
    pos = 0
    for s in range(counts.shape[0]):
        for _ in range(counts[s]):
            agents[pos] = s
            pos += 1
    return pos


# ---------------------------------------------------------------------------
# linear backend


@njit(cache=True, inline="always")
def linear_sample(counts, order, total, state):
    x = randbelow(state, total)
    for idx in range(order.shape[0]):
        s = order[idx]
        c = counts[s]
        if x < c:
            return np.int64(s)
        x -= c
    return order[order.shape[0] - 1]  # unreachable on consistent input


# ---------------------------------------------------------------------------
# binary search tree backend (implicit, breadth-first indexed)


@njit(cache=True)
def bst_build(tree, kleaves, counts):
    """tree[i] for inner i holds the left-subtree total; leaves hold counts."""
    size = 2 * kleaves
    for i in range(size):
        tree[i] = 0
    q = counts.shape[0]
    scratch = np.zeros(size, dtype=np.int64)
    for s in range(q):
        scratch[kleaves + s] = counts[s]
        tree[kleaves + s] = counts[s]
    for i in range(kleaves - 1, 0, -1):
        scratch[i] = scratch[2 * i] + scratch[2 * i + 1]
        tree[i] = scratch[2 * i]
    return scratch[1] if kleaves > 1 else tree[1]


@njit(cache=True, inline="always")
def bst_sample(tree, kleaves, total, state):
    x = randbelow(state, total)
    i = 1
    while i < kleaves:
        left = tree[i]
        if x < left:
            i = 2 * i
        else:
            x -= left
            i = 2 * i + 1
    return np.int64(i - kleaves)


@njit(cache=True, inline="always")
def bst_update(tree, kleaves, s, d):
    i = kleaves + s
    tree[i] += d
    while i > 1:
        parent = i >> 1
        if i == parent << 1:
            tree[parent] += d
        i = parent


@njit(cache=True, inline="always")
def bst_sample_remove(tree, kleaves, total, state):
    s = bst_sample(tree, kleaves, total, state)
    bst_update(tree, kleaves, s, -1)
    return s


# ---------------------------------------------------------------------------
# dynamic alias table backend


@njit(cache=True)
def alias_rebuild(F, S, A, counts, meta, alias_rows, alias_start):
    """O(k) two-bucket build onto row targets floor(n/k) / ceil(n/k).

    The n mod k surplus goes to the first n mod k rows.  Afterwards every
    row weight equals its target and rmin/rmax are exact.
    """
    k = F.shape[0]
    n = 0
    for c in range(k):
        n += counts[c]
    base = n // k
    extra = n - base * k

    rem = np.empty(k, dtype=np.int64)
    small = np.empty(k, dtype=np.int64)
    large = np.empty(k, dtype=np.int64)
    ns = 0
    nl = 0
    for c in range(k):
        rem[c] = counts[c]
        target = base + (1 if c < extra else 0)
        if rem[c] < target:
            small[ns] = c
            ns += 1
        elif rem[c] > target:
            large[nl] = c
            nl += 1
        else:
            F[c] = rem[c]
            S[c] = 0
            A[c] = c
    while ns > 0 and nl > 0:
        s = small[ns - 1]
        ns -= 1
        l = large[nl - 1]
        ts = base + (1 if s < extra else 0)
        F[s] = rem[s]
        S[s] = ts - rem[s]
        A[s] = l
        rem[l] -= S[s]
        tl = base + (1 if l < extra else 0)
        if rem[l] < tl:
            nl -= 1
            small[ns] = l
            ns += 1
        elif rem[l] == tl:
            nl -= 1
            F[l] = rem[l]
            S[l] = 0
            A[l] = l
    while nl > 0:  # defensive; totals force rem == target here
        l = large[nl - 1]
        nl -= 1
        F[l] = rem[l]
        S[l] = 0
        A[l] = l
    while ns > 0:
        s = small[ns - 1]
        ns -= 1
        F[s] = rem[s]
        S[s] = 0
        A[s] = s

    meta[_TOTAL] = n
    if n == 0:
        meta[_RMIN] = 0
        meta[_RMAX] = 0
    else:
        meta[_RMIN] = base
        meta[_RMAX] = base + 1 if extra > 0 else base
    meta[_REBUILDS] += 1

    # CSR index of rows carrying each color as alias (S > 0 rows only);
    # S never grows between rebuilds, so the index stays a superset.
    for c in range(k + 1):
        alias_start[c] = 0
    for row in range(k):
        if S[row] > 0:
            alias_start[A[row] + 1] += 1
    for c in range(k):
        alias_start[c + 1] += alias_start[c]
    fill = np.empty(k, dtype=np.int64)
    for c in range(k):
        fill[c] = alias_start[c]
    for row in range(k):
        if S[row] > 0:
            c = A[row]
            alias_rows[fill[c]] = row
            fill[c] += 1


@njit(cache=True, inline="always")
def _alias_needs_rebuild(meta, k, alpha, beta):
    n = meta[_TOTAL]
    floor_nk = n // k
    ceil_nk = (n + k - 1) // k
    return meta[_RMIN] < alpha * floor_nk or meta[_RMAX] > beta * ceil_nk


@njit(cache=True, inline="always")
def alias_sample_entry(F, S, A, meta, state):
    """Rejection sampling over rows; returns (color, row, entry)."""
    k = F.shape[0]
    rmax = meta[_RMAX]
    while True:
        meta[_TRIALS] += 1
        row = randbelow(state, k)
        x = randbelow(state, rmax)
        f = F[row]
        if x < f:
            meta[_EMITS] += 1
            return np.int64(row), np.int64(row), np.int64(0)
        if x < f + S[row]:
            meta[_EMITS] += 1
            return A[row], np.int64(row), np.int64(1)


@njit(cache=True, inline="always")
def alias_sample(F, S, A, meta, state):
    color, _, _ = alias_sample_entry(F, S, A, meta, state)
    return color


@njit(cache=True)
def alias_sample_remove(F, S, A, counts, meta, alias_rows, alias_start, state, alpha, beta):
    color, row, entry = alias_sample_entry(F, S, A, meta, state)
    if entry == 0:
        F[row] -= 1
    else:
        S[row] -= 1
    counts[color] -= 1
    meta[_TOTAL] -= 1
    rw = F[row] + S[row]
    if rw < meta[_RMIN]:
        meta[_RMIN] = rw
    if _alias_needs_rebuild(meta, F.shape[0], alpha, beta):
        alias_rebuild(F, S, A, counts, meta, alias_rows, alias_start)
    return color


@njit(cache=True)
def alias_add(F, S, A, counts, meta, alias_rows, alias_start, color, cnt, alpha, beta):
    if cnt == 0:
        return
    F[color] += cnt
    counts[color] += cnt
    meta[_TOTAL] += cnt
    rw = F[color] + S[color]
    if rw > meta[_RMAX]:
        meta[_RMAX] = rw
    if _alias_needs_rebuild(meta, F.shape[0], alpha, beta):
        alias_rebuild(F, S, A, counts, meta, alias_rows, alias_start)


@njit(cache=True)
def alias_remove(F, S, A, counts, meta, alias_rows, alias_start, color, cnt, alpha, beta):
    """Bulk removal: drain the color's own row first, then its alias rows."""
    if cnt == 0:
        return
    left = cnt
    take = F[color] if F[color] < left else left
    F[color] -= take
    left -= take
    rw = F[color] + S[color]
    if rw < meta[_RMIN]:
        meta[_RMIN] = rw
    i = alias_start[color]
    end = alias_start[color + 1]
    while left > 0 and i < end:
        row = alias_rows[i]
        take = S[row] if S[row] < left else left
        S[row] -= take
        left -= take
        rw = F[row] + S[row]
        if rw < meta[_RMIN]:
            meta[_RMIN] = rw
        i += 1
    counts[color] -= cnt
    meta[_TOTAL] -= cnt
    if _alias_needs_rebuild(meta, F.shape[0], alpha, beta):
        alias_rebuild(F, S, A, counts, meta, alias_rows, alias_start)


# ---------------------------------------------------------------------------
# owning classes


def _validate_counts(counts):
    counts = np.asarray(counts, dtype=np.int64)
    if counts.ndim != 1 or counts.shape[0] == 0:
        raise ValueError("counts must be a non-empty 1-d sequence")
    if np.any(counts < 0):
        raise ValueError("negative state count")
    return counts


class ArrayUrn:
    """One state word per agent; removal swaps with the last element.

    Capacity is fixed at the initial population size, so the urn never holds
    more agents than it started with.
    """

    backend = "array"

    def __init__(self, counts):
        counts = _validate_counts(counts)
        self.q = counts.shape[0]
        self._counts = counts.copy()
        self._n = int(counts.sum())
        self._agents = np.empty(self._n, dtype=np.int32)
        array_fill(self._agents, counts)
        self._size = self._n

    def total(self) -> int:
        return self._size

    def count(self, state: int) -> int:
        return int(self._counts[state])

    def counts_vector(self) -> np.ndarray:
        return self._counts.copy()

    def sample_with_replacement(self, rng: RngStream) -> int:
        if self._size == 0:
            raise ValueError("cannot sample from an empty urn")
        return int(array_sample(self._agents, np.int64(self._size), rng.state))

    def sample_without_replacement(self, rng: RngStream) -> int:
        if self._size == 0:
            raise ValueError("cannot sample from an empty urn")
        s = int(array_sample_remove(self._agents, np.int64(self._size), rng.state))
        self._size -= 1
        self._counts[s] -= 1
        return s

    def add(self, state: int, count: int = 1) -> None:
        if count < 0:
            raise ValueError("count must be non-negative")
        if self._size + count > self._agents.shape[0]:
            raise ValueError("urn capacity exceeded")
        for _ in range(count):
            self._agents[self._size] = state
            self._size += 1
        self._counts[state] += count

    def remove(self, state: int, count: int = 1) -> None:
        if count < 0:
            raise ValueError("count must be non-negative")
        if self._counts[state] < count:
            raise ValueError(f"cannot remove {count} agents of state {state}")
        left = count
        i = 0
        while left > 0:
            if self._agents[i] == state:
                self._size -= 1
                self._agents[i] = self._agents[self._size]
                left -= 1
            else:
                i += 1
        self._counts[state] -= count

    sample = sample_with_replacement


class LinearUrn:
    """Count vector sampled by linear search, optionally in a renamed order."""

    backend = "linear"

    def __init__(self, counts):
        counts = _validate_counts(counts)
        self.q = counts.shape[0]
        self._counts = counts.copy()
        self._n = int(counts.sum())
        self._order = np.arange(self.q, dtype=np.int64)

    def total(self) -> int:
        return self._n

    def count(self, state: int) -> int:
        return int(self._counts[state])

    def counts_vector(self) -> np.ndarray:
        return self._counts.copy()

    def set_order(self, order) -> None:
        """Visit states in this order during the scan (renaming heuristic)."""
        order = np.asarray(order, dtype=np.int64)
        if sorted(order.tolist()) != list(range(self.q)):
            raise ValueError("order must be a permutation of the states")
        self._order = order

    def sample_with_replacement(self, rng: RngStream) -> int:
        if self._n == 0:
            raise ValueError("cannot sample from an empty urn")
        return int(linear_sample(self._counts, self._order, np.int64(self._n), rng.state))

    def sample_without_replacement(self, rng: RngStream) -> int:
        s = self.sample_with_replacement(rng)
        self._counts[s] -= 1
        self._n -= 1
        return s

    def add(self, state: int, count: int = 1) -> None:
        if count < 0:
            raise ValueError("count must be non-negative")
        self._counts[state] += count
        self._n += count

    def remove(self, state: int, count: int = 1) -> None:
        if count < 0:
            raise ValueError("count must be non-negative")
        if self._counts[state] < count:
            raise ValueError(f"cannot remove {count} agents of state {state}")
        self._counts[state] -= count
        self._n -= count

    sample = sample_with_replacement


class BstUrn:
    """Implicit complete binary tree; inner nodes store left-subtree totals."""

    backend = "bst"

    def __init__(self, counts):
        counts = _validate_counts(counts)
        self.q = counts.shape[0]
        self.kleaves = 1
        while self.kleaves < self.q:
            self.kleaves *= 2
        self.tree = np.zeros(2 * self.kleaves, dtype=np.int64)
        bst_build(self.tree, np.int64(self.kleaves), counts)
        self._n = int(counts.sum())

    def total(self) -> int:
        return self._n

    def count(self, state: int) -> int:
        return int(self.tree[self.kleaves + state])

    def counts_vector(self) -> np.ndarray:
        return self.tree[self.kleaves : self.kleaves + self.q].copy()

    def sample_with_replacement(self, rng: RngStream) -> int:
        if self._n == 0:
            raise ValueError("cannot sample from an empty urn")
        return int(bst_sample(self.tree, np.int64(self.kleaves), np.int64(self._n), rng.state))

    def sample_without_replacement(self, rng: RngStream) -> int:
        s = self.sample_with_replacement(rng)
        bst_update(self.tree, np.int64(self.kleaves), np.int64(s), np.int64(-1))
        self._n -= 1
        return s

    def add(self, state: int, count: int = 1) -> None:
        if count < 0:
            raise ValueError("count must be non-negative")
        if count:
            bst_update(self.tree, np.int64(self.kleaves), np.int64(state), np.int64(count))
            self._n += count

    def remove(self, state: int, count: int = 1) -> None:
        if count < 0:
            raise ValueError("count must be non-negative")
        if self.count(state) < count:
            raise ValueError(f"cannot remove {count} agents of state {state}")
        if count:
            bst_update(self.tree, np.int64(self.kleaves), np.int64(state), np.int64(-count))
            self._n -= count

    sample = sample_with_replacement


class AliasUrn:
    """Dynamic alias table: integer-weight Vose table with rebuild thresholds.

    Row weights are kept within [alpha*floor(n/k), beta*ceil(n/k)] (checked
    after every update, rebuilt otherwise), which bounds the rejection rate
    and gives expected O(1) sampling with amortized O(1) updates.  The O(1)
    guarantees assume n >= q**2; smaller populations still sample correctly
    but degrade toward O(q) rebuild churn, so they must be opted into.
    """

    backend = "alias"

    def __init__(self, counts, alpha: float = 0.5, beta: float = 2.0,
                 allow_undersized: bool = False):
        counts = _validate_counts(counts)
        if not (0.0 < alpha < 1.0 < beta):
            raise ValueError("thresholds must satisfy 0 < alpha < 1 < beta")
        self.q = counts.shape[0]
        n = int(counts.sum())
        if 0 < n < self.q * self.q and not allow_undersized:
            raise ValueError(
                f"alias table needs n >= q**2 ({self.q**2}) for its performance "
                f"bounds, got n={n}; pass allow_undersized=True to override"
            )
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.F = np.zeros(self.q, dtype=np.int64)
        self.S = np.zeros(self.q, dtype=np.int64)
        self.A = np.zeros(self.q, dtype=np.int64)
        self._counts = counts.copy()
        self.meta = np.zeros(6, dtype=np.int64)
        self.alias_rows = np.zeros(self.q, dtype=np.int64)
        self.alias_start = np.zeros(self.q + 1, dtype=np.int64)
        alias_rebuild(self.F, self.S, self.A, self._counts, self.meta,
                      self.alias_rows, self.alias_start)
        self.meta[_REBUILDS] = 0  # construction is not a rebuild

    def total(self) -> int:
        return int(self.meta[_TOTAL])

    def count(self, state: int) -> int:
        return int(self._counts[state])

    def counts_vector(self) -> np.ndarray:
        return self._counts.copy()

    @property
    def rebuilds(self) -> int:
        return int(self.meta[_REBUILDS])

    @property
    def rejection_rate(self) -> float:
        trials = int(self.meta[_TRIALS])
        if trials == 0:
            return 0.0
        return 1.0 - int(self.meta[_EMITS]) / trials

    def row_weights(self) -> np.ndarray:
        return self.F + self.S

    def sample_with_replacement(self, rng: RngStream) -> int:
        if self.meta[_TOTAL] == 0:
            raise ValueError("cannot sample from an empty urn")
        return int(alias_sample(self.F, self.S, self.A, self.meta, rng.state))

    def sample_without_replacement(self, rng: RngStream) -> int:
        if self.meta[_TOTAL] == 0:
            raise ValueError("cannot sample from an empty urn")
        return int(
            alias_sample_remove(self.F, self.S, self.A, self._counts, self.meta,
                                self.alias_rows, self.alias_start, rng.state,
                                self.alpha, self.beta)
        )

    def add(self, state: int, count: int = 1) -> None:
        if count < 0:
            raise ValueError("count must be non-negative")
        alias_add(self.F, self.S, self.A, self._counts, self.meta,
                  self.alias_rows, self.alias_start, np.int64(state),
                  np.int64(count), self.alpha, self.beta)

    def remove(self, state: int, count: int = 1) -> None:
        if count < 0:
            raise ValueError("count must be non-negative")
        if self._counts[state] < count:
            raise ValueError(f"cannot remove {count} agents of state {state}")
        alias_remove(self.F, self.S, self.A, self._counts, self.meta,
                     self.alias_rows, self.alias_start, np.int64(state),
                     np.int64(count), self.alpha, self.beta)

    sample = sample_with_replacement


BACKENDS = {
    "array": ArrayUrn,
    "linear": LinearUrn,
    "bst": BstUrn,
    "alias": AliasUrn,
}


def make_urn(counts, backend: str = "bst", **kwargs):
    """Construct an urn over `counts` with the named backend."""
    try:
        cls = BACKENDS[backend]
    except KeyError:
        raise ValueError(f"unknown backend {backend!r}; choose from {sorted(BACKENDS)}")
    return cls(counts, **kwargs)
