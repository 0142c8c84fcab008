"""Seeded random number streams.

The generator is xoshiro256** (xorshift family, period 2**256 - 1), seeded
through splitmix64.  It is implemented here rather than taken from numpy so
that every draw is bit-exact across platforms and library versions; all
samplers in this package consume raw 64-bit words or 53-bit doubles from this
stream and nothing else.

The hot-path primitives are numba kernels operating on a 4-word uint64 state
array; :class:`RngStream` is the thin owning wrapper.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_U64 = np.uint64
_GOLDEN = _U64(0x9E3779B97F4A7C15)
_MASK64 = 0xFFFFFFFFFFFFFFFF


@njit(cache=True, inline="always")
def _splitmix64(z):
    z = (z + _U64(0x9E3779B97F4A7C15))
    z = (z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)
    return z ^ (z >> _U64(31))


@njit(cache=True)
def seed_state(state, seed):
    """Fill a 4-word xoshiro256** state from a 64-bit seed via splitmix64."""
    z = _U64(seed)
    nonzero = False
    for i in range(4):
        z = z + _U64(0x9E3779B97F4A7C15)
        w = z
        w = (w ^ (w >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
        w = (w ^ (w >> _U64(27))) * _U64(0x94D049BB133111EB)
        w = w ^ (w >> _U64(31))
        state[i] = w
        if w != _U64(0):
            nonzero = True
    if not nonzero:
        state[0] = _U64(0x9E3779B97F4A7C15)


@njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << k) | (x >> (_U64(64) - k))


@njit(cache=True, inline="always")
def next_u64(state):
    result = _rotl(state[1] * _U64(5), _U64(7)) * _U64(9)
    t = state[1] << _U64(17)
    state[2] ^= state[0]
    state[3] ^= state[1]
    state[1] ^= state[2]
    state[0] ^= state[3]
    state[2] ^= t
    state[3] = _rotl(state[3], _U64(45))
    return result


@njit(cache=True, inline="always")
def next_double(state):
    """Uniform double in [0, 1) with 53 random bits."""
    return (next_u64(state) >> _U64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True, inline="always")
def randbelow(state, n):
    """Unbiased uniform integer in [0, n) for int64 n >= 1."""
    un = _U64(n)
    # rejection threshold (2**64 - n) % n keeps the draw unbiased
    threshold = (_U64(0) - un) % un
    while True:
        x = next_u64(state)
        if x >= threshold:
            return np.int64(x % un)


@njit(cache=True)
def derive_seed(master, index):
    """Independent child seed for run `index`; pinned mixing function."""
    return _splitmix64(_splitmix64(_U64(master)) ^ _splitmix64(_U64(index) ^ _GOLDEN))


class RngStream:
    """Single-owner random stream; same seed gives the same draws forever."""

    __slots__ = ("seed", "state")

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self.state = np.empty(4, dtype=np.uint64)
        seed_state(self.state, _U64(self.seed))

    def u64(self) -> int:
        return int(next_u64(self.state))

    def random(self) -> float:
        return float(next_double(self.state))

    def below(self, n: int) -> int:
        if n <= 0:
            raise ValueError("bound must be positive")
        return int(randbelow(self.state, np.int64(n)))

    def spawn(self, index: int) -> "RngStream":
        """Stream for an independent run; serial and parallel drivers agree."""
        return RngStream(int(derive_seed(_U64(self.seed), _U64(index & _MASK64))))

    def __repr__(self) -> str:  # pragma: no cover
        return f"RngStream(seed={self.seed})"


def spawn_seed(master: int, index: int) -> int:
    """Seed for run `index` derived from a master seed (pure function)."""
    return int(derive_seed(_U64(master & _MASK64), _U64(index & _MASK64)))
