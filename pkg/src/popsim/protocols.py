"""Protocol definitions: transition tables, built-ins, and table analyses.

A deterministic protocol is a q x q table of (initiator-out, responder-out)
pairs.  Randomized protocols subclass :class:`Protocol` and implement
``apply`` / ``batch_apply`` themselves; ``batch_apply`` is how the batched
simulators inform a protocol that a state pair interacts `num` times at once,
and the protocol must assign exactly ``2 * num`` agents to output states.

The analyses at the bottom feed the batched simulators' heuristics: per-row
output groups for one-way tables, the set of configuration-preserving pairs,
and the permutation that orders states by decreasing population.
"""

from __future__ import annotations

import numpy as np

from .rng import RngStream
from .variates import binomial


class Protocol:
    """Common protocol surface; deterministic protocols carry a table."""

    def __init__(self, q: int, name: str, table=None, one_way: bool | None = None):
        if q < 1:
            raise ValueError("protocol needs at least one state")
        self.q = int(q)
        self.name = name
        if table is not None:
            table = np.asarray(table, dtype=np.int64)
            if table.shape != (q, q, 2):
                raise ValueError(f"table must have shape ({q}, {q}, 2)")
            if table.min() < 0 or table.max() >= q:
                raise ValueError("table outputs out of state range")
        self.table = table
        if one_way is None:
            if table is None:
                one_way = False
            else:
                one_way = bool(np.all(table[:, :, 1] == np.arange(q)[None, :]))
        elif one_way and table is not None:
            if not np.all(table[:, :, 1] == np.arange(q)[None, :]):
                raise ValueError("one-way protocol must leave the responder unchanged")
        self.one_way = bool(one_way)

    @property
    def deterministic(self) -> bool:
        return self.table is not None

    def _check_states(self, initiator: int, responder: int) -> None:
        if not (0 <= initiator < self.q and 0 <= responder < self.q):
            raise ValueError(f"state pair ({initiator}, {responder}) out of range")

    def apply(self, initiator: int, responder: int, rng: RngStream | None = None):
        """Successor pair for one ordered interaction."""
        self._check_states(initiator, responder)
        out = self.table[initiator, responder]
        return int(out[0]), int(out[1])

    def batch_apply(self, initiator: int, responder: int, num: int, assign,
                    rng: RngStream | None = None) -> None:
        """Assign output states for `num` (initiator, responder) interactions.

        Deterministic protocols send `num` agents to each of the two outputs;
        randomized protocols may split via internal sampling.  Total assigned
        must be 2 * num.
        """
        if num < 1:
            raise ValueError("num must be at least 1")
        self._check_states(initiator, responder)
        out = self.table[initiator, responder]
        assign(int(out[0]), num)
        assign(int(out[1]), num)

    def pair_outcomes(self, initiator: int, responder: int):
        """Exact outcome distribution of one interaction: [((a, b), prob)].

        Available for deterministic protocols and any randomized protocol
        that overrides it; the exact-distribution oracle requires this.
        """
        self._check_states(initiator, responder)
        if self.table is None:
            raise NotImplementedError(
                f"protocol {self.name!r} does not expose exact pair outcomes"
            )
        out = self.table[initiator, responder]
        return [((int(out[0]), int(out[1])), 1.0)]

    def __repr__(self) -> str:  # pragma: no cover
        kind = "one-way" if self.one_way else "two-way"
        return f"<Protocol {self.name} q={self.q} {kind}>"


def checked_batch_apply(protocol: Protocol, initiator: int, responder: int,
                        num: int, assign, rng: RngStream | None = None) -> None:
    """batch_apply with the agent-conservation contract enforced."""
    assigned = 0

    def counting_assign(state, count):
        nonlocal assigned
        if count < 0 or not (0 <= state < protocol.q):
            raise ValueError("invalid batch assignment")
        assigned += count
        assign(state, count)

    protocol.batch_apply(initiator, responder, num, counting_assign, rng)
    if assigned != 2 * num:
        raise ValueError(
            f"protocol {protocol.name!r} assigned {assigned} agents "
            f"for {num} interactions (expected {2 * num})"
        )


def one_way_table(q: int, initiator_out) -> np.ndarray:
    """Build a (q, q, 2) table from a function (i, j) -> initiator output."""
    table = np.empty((q, q, 2), dtype=np.int64)
    for i in range(q):
        for j in range(q):
            table[i, j, 0] = initiator_out(i, j)
            table[i, j, 1] = j
    return table


# ---------------------------------------------------------------------------
# built-in protocols

FOLLOWER, LEADER = 0, 1


def leader_election() -> Protocol:
    """Two-state one-way leader election: a leader meeting a leader steps down."""
    def out(i, j):
        return FOLLOWER if i == j == LEADER else i
    return Protocol(2, "leader-election", one_way_table(2, out), one_way=True)


def identity_protocol(q: int = 2) -> Protocol:
    table = np.empty((q, q, 2), dtype=np.int64)
    for i in range(q):
        for j in range(q):
            table[i, j] = (i, j)
    return Protocol(q, "identity", table)


def swap_protocol(q: int = 2) -> Protocol:
    table = np.empty((q, q, 2), dtype=np.int64)
    for i in range(q):
        for j in range(q):
            table[i, j] = (j, i)
    return Protocol(q, "swap", table)


def random_two_way(q: int, table_seed: int) -> Protocol:
    """Both outputs of every pair drawn i.i.d. uniform from the state space.

    The table is generated once from `table_seed` (row-major, initiator
    output before responder output), so experiments replay exactly.
    """
    rng = RngStream(table_seed)
    table = np.empty((q, q, 2), dtype=np.int64)
    for i in range(q):
        for j in range(q):
            table[i, j, 0] = rng.below(q)
            table[i, j, 1] = rng.below(q)
    return Protocol(q, f"random-two-way(q={q},seed={table_seed})", table)


def phase_clock(m: int) -> Protocol:
    """One-way clock over m circular phases with a marked/unmarked bit.

    State ids: phase p unmarked -> p, phase p marked -> m + p.  Pinned rule:
    a marked initiator always advances its phase; an unmarked initiator
    advances iff the responder is marked or the responder's phase is ahead
    by 1..(m-1)//2 circularly.  Responders never change.
    """
    if m < 2:
        raise ValueError("clock needs at least two phases")
    window = (m - 1) // 2

    def out(i, j):
        if i >= m:  # marked initiator advances autonomously
            return m + (i - m + 1) % m
        p = i
        if j >= m:  # marked responder always lets the initiator advance
            return (p + 1) % m
        diff = (j - p) % m
        if 1 <= diff <= window:
            return (p + 1) % m
        return p

    return Protocol(2 * m, f"phase-clock(m={m})", one_way_table(2 * m, out),
                    one_way=True)


def uniform_clock_counts(n: int, m: int) -> np.ndarray:
    """Agents spread evenly over all phases, marked and unmarked alike."""
    q = 2 * m
    counts = np.full(q, n // q, dtype=np.int64)
    counts[: n % q] += 1
    return counts


def running_clock_counts(n: int, m: int, marked: int | None = None) -> np.ndarray:
    """All agents in the first phase; sqrt(n) of them marked by default."""
    if marked is None:
        marked = int(np.sqrt(n))
    if marked > n:
        raise ValueError("more marked agents than agents")
    counts = np.zeros(2 * m, dtype=np.int64)
    counts[0] = n - marked
    counts[m] = marked
    return counts


class CoinIncrementProtocol(Protocol):
    """Randomized two-way example: a fair coin picks which side of the pair
    circularly increments its state.  Batch form splits via a binomial."""

    def __init__(self, q: int = 4):
        super().__init__(q, f"coin-increment(q={q})", table=None, one_way=False)

    def apply(self, initiator, responder, rng: RngStream = None):
        self._check_states(initiator, responder)
        if rng.below(2) == 0:
            return (initiator + 1) % self.q, responder
        return initiator, (responder + 1) % self.q

    def batch_apply(self, initiator, responder, num, assign, rng: RngStream = None):
        if num < 1:
            raise ValueError("num must be at least 1")
        self._check_states(initiator, responder)
        k = binomial(num, 0.5, rng)  # interactions where the initiator advances
        if k:
            assign((initiator + 1) % self.q, k)
            assign(responder, k)
        if num - k:
            assign(initiator, num - k)
            assign((responder + 1) % self.q, num - k)

    def pair_outcomes(self, initiator, responder):
        self._check_states(initiator, responder)
        return [
            (((initiator + 1) % self.q, responder), 0.5),
            ((initiator, (responder + 1) % self.q), 0.5),
        ]


# ---------------------------------------------------------------------------
# table analyses used by the heuristics


def build_partition(protocol: Protocol):
    """Per-row responder groups sharing one initiator output (one-way only).

    Returns, for each initiator row, a list of (output_state, members) with
    members disjoint and covering all responder states.
    """
    if protocol.table is None:
        raise ValueError("partitioning needs a deterministic table")
    if not protocol.one_way:
        raise ValueError(
            "row partitioning applies to one-way protocols only; "
            "use detect_skips for two-way tables"
        )
    q = protocol.q
    rows = []
    for i in range(q):
        groups: dict[int, list[int]] = {}
        for j in range(q):
            groups.setdefault(int(protocol.table[i, j, 0]), []).append(j)
        rows.append(sorted(groups.items()))
    return rows


class SkipSet:
    """Ordered state pairs whose transition preserves the configuration."""

    def __init__(self, mask: np.ndarray):
        self.mask = mask

    def __contains__(self, pair) -> bool:
        u, v = pair
        return bool(self.mask[u, v])

    def __len__(self) -> int:
        return int(self.mask.sum())

    def pairs(self):
        us, vs = np.nonzero(self.mask)
        return [(int(u), int(v)) for u, v in zip(us, vs)]


def detect_skips(protocol: Protocol) -> SkipSet:
    """Pairs (u, v) with delta(u, v) in {(u, v), (v, u)}."""
    if protocol.table is None:
        raise ValueError("skip detection needs a deterministic table")
    q = protocol.q
    t = protocol.table
    u = np.arange(q)[:, None]
    v = np.arange(q)[None, :]
    keep = (t[:, :, 0] == u) & (t[:, :, 1] == v)
    swap = (t[:, :, 0] == v) & (t[:, :, 1] == u)
    return SkipSet(keep | swap)


def renaming_permutation(counts) -> np.ndarray:
    """States ordered by non-increasing count, ties by ascending state id."""
    counts = np.asarray(counts)
    return np.argsort(-counts, kind="stable").astype(np.int64)


# ---------------------------------------------------------------------------
# registry used by the command line and verification drivers


def make_protocol(name: str, q: int | None = None, table_seed: int = 0):
    """Instantiate a built-in protocol by CLI name."""
    if name == "leader-election":
        return leader_election()
    if name in ("uniform-clock", "running-clock"):
        q = 8 if q is None else q
        if q % 2 != 0:
            raise ValueError("clock protocols need an even state count (2*m)")
        return phase_clock(q // 2)
    if name == "random-two-way":
        return random_two_way(4 if q is None else q, table_seed)
    if name == "identity":
        return identity_protocol(2 if q is None else q)
    if name == "coin-increment":
        return CoinIncrementProtocol(4 if q is None else q)
    raise ValueError(f"unknown protocol {name!r}")


def default_initial_counts(name: str, protocol: Protocol, n: int,
                           marked: int | None = None) -> np.ndarray:
    """Benchmark initial configurations for the built-in protocols."""
    q = protocol.q
    if name == "leader-election":
        counts = np.zeros(q, dtype=np.int64)
        counts[LEADER] = n
        return counts
    if name == "running-clock":
        return running_clock_counts(n, q // 2, marked)
    if name == "uniform-clock":
        return uniform_clock_counts(n, q // 2)
    # evenly spread for random-two-way, identity, coin-increment
    counts = np.full(q, n // q, dtype=np.int64)
    counts[: n % q] += 1
    return counts


PROTOCOL_NAMES = (
    "leader-election",
    "uniform-clock",
    "running-clock",
    "random-two-way",
    "identity",
    "coin-increment",
)
