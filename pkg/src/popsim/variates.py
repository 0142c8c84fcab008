"""Discrete random variates built on the package's uniform stream.

Hypergeometric sampling uses inversion by chop-down for small sample sizes
and a ratio-of-uniforms rejection scheme with squeeze steps for large ones,
so the expected cost per variate is O(1) over the whole parameter range.
Multivariate hypergeometric vectors are produced by conditional chaining with
early termination once the draw budget is exhausted, visiting categories in a
caller-supplied order.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .rng import RngStream, next_double

# ratio-of-uniforms constants: 2*sqrt(2/e) and 3 - 2*sqrt(3/e)
_D1 = 1.7155277699214135
_D2 = 0.8989161620588988


@njit(cache=True)
def _hyper_inversion(state, good, bad, sample):
    """Chop-down inversion; cheap when min(sample, pop - sample) is small."""
    pop = good + bad
    lo = sample - bad if sample > bad else 0
    hi = good if good < sample else sample
    if lo == hi:
        return lo
    # log pmf at the lower support end, then walk up the recurrence
    lp = (
        math.lgamma(good + 1.0)
        - math.lgamma(lo + 1.0)
        - math.lgamma(good - lo + 1.0)
        + math.lgamma(bad + 1.0)
        - math.lgamma(sample - lo + 1.0)
        - math.lgamma(bad - sample + lo + 1.0)
        - (
            math.lgamma(pop + 1.0)
            - math.lgamma(sample + 1.0)
            - math.lgamma(pop - sample + 1.0)
        )
    )
    p0 = math.exp(lp)
    while True:
        u = next_double(state)
        k = lo
        p = p0
        while u > p:
            u -= p
            p *= ((good - k) * (sample - k)) / ((k + 1.0) * (bad - sample + k + 1.0))
            k += 1
            if k > hi:
                break
        if k <= hi:
            return k
        # float underflow pushed u past the total mass; retry


@njit(cache=True)
def _hyper_hrua(state, good, bad, sample):
    """Ratio-of-uniforms rejection (Stadlober-style) for large samples."""
    popsize = good + bad
    computed_sample = sample if sample <= popsize - sample else popsize - sample
    mingoodbad = good if good <= bad else bad
    maxgoodbad = good if good > bad else bad
    m = computed_sample

    d4 = mingoodbad / popsize
    d5 = 1.0 - d4
    d6 = m * d4 + 0.5
    d7 = math.sqrt((popsize - m) * m * d4 * d5 / (popsize - 1.0) + 0.5)
    d8 = _D1 * d7 + _D2
    mn = m if m < mingoodbad else mingoodbad
    d9 = float((m + 1) * (mingoodbad + 1) // (popsize + 2))
    d10 = (
        math.lgamma(d9 + 1.0)
        + math.lgamma(mingoodbad - d9 + 1.0)
        + math.lgamma(m - d9 + 1.0)
        + math.lgamma(maxgoodbad - m + d9 + 1.0)
    )
    d11 = float(mn + 1)
    cap = math.floor(d6 + 16.0 * d7)
    if cap < d11:
        d11 = cap

    z = 0
    while True:
        x = next_double(state)
        y = next_double(state)
        w = d6 + d8 * (y - 0.5) / x
        if w < 0.0 or w >= d11:
            continue
        zf = math.floor(w)
        z = int(zf)
        t = d10 - (
            math.lgamma(zf + 1.0)
            + math.lgamma(mingoodbad - zf + 1.0)
            + math.lgamma(m - zf + 1.0)
            + math.lgamma(maxgoodbad - m + zf + 1.0)
        )
        if x * (4.0 - x) - 3.0 <= t:
            break
        if x * (x - t) >= 1.0:
            continue
        if 2.0 * math.log(x) <= t:
            break

    if good > bad:
        z = m - z
    if computed_sample < sample:
        z = good - z
    return np.int64(z)


@njit(cache=True)
def hyper_kernel(state, good, bad, sample):
    """Number of `good` items among `sample` draws without replacement."""
    if sample <= 0 or good <= 0:
        return np.int64(0)
    pop = good + bad
    if sample >= pop:
        return np.int64(good)
    if good >= pop:
        return np.int64(sample)
    m = sample if sample <= pop - sample else pop - sample
    if m < 10:
        return np.int64(_hyper_inversion(state, good, bad, sample))
    return np.int64(_hyper_hrua(state, good, bad, sample))


@njit(cache=True)
def mvhyper_kernel(state, counts, total, draws, order, out):
    """Fill `out` with a multivariate hypergeometric split of `draws`.

    Categories are visited in `order` and the chain stops as soon as the
    remaining budget hits zero, so concentrated populations visited first
    need few variates.  `counts` is read-only; `out` must be zeroed.
    """
    rem_total = total
    rem_draws = draws
    for idx in range(order.shape[0]):
        if rem_draws == 0:
            break
        c = counts[order[idx]]
        if c <= 0:
            continue
        if c >= rem_total:
            out[order[idx]] = rem_draws
            rem_draws = 0
            break
        x = hyper_kernel(state, c, rem_total - c, rem_draws)
        out[order[idx]] = x
        rem_draws -= x
        rem_total -= c
    return rem_draws


@njit(cache=True)
def _binomial_inversion(state, n, p):
    q = 1.0 - p
    s = p / q
    base = n * math.log(q)
    while True:
        u = next_double(state)
        k = 0
        pr = math.exp(base)
        while u > pr:
            u -= pr
            pr *= s * (n - k) / (k + 1.0)
            k += 1
            if k > n:
                break
        if k <= n:
            return k


@njit(cache=True)
def _binomial_btrs(state, n, p):
    """Transformed-rejection binomial sampler; exact for n*p >= 10."""
    q = 1.0 - p
    spq = math.sqrt(n * p * q)
    b = 1.15 + 2.53 * spq
    a = -0.0873 + 0.0248 * b + 0.01 * p
    c = n * p + 0.5
    vr = 0.92 - 4.2 / b
    alpha = (2.83 + 5.1 / b) * spq
    lpq = math.log(p / q)
    m = int((n + 1) * p)
    h = math.lgamma(m + 1.0) + math.lgamma(n - m + 1.0)
    while True:
        u = next_double(state) - 0.5
        v = next_double(state)
        us = 0.5 - abs(u)
        kf = math.floor((2.0 * a / us + b) * u + c)
        if kf < 0.0 or kf > n:
            continue
        k = int(kf)
        if us >= 0.07 and v <= vr:
            return k
        v = math.log(v * alpha / (a / (us * us) + b))
        if v <= h - math.lgamma(k + 1.0) - math.lgamma(n - k + 1.0) + (k - m) * lpq:
            return k


@njit(cache=True)
def binomial_kernel(state, n, p):
    if n <= 0 or p <= 0.0:
        return np.int64(0)
    if p >= 1.0:
        return np.int64(n)
    pp = p if p <= 0.5 else 1.0 - p
    if n * pp < 30.0:
        k = _binomial_inversion(state, n, pp)
    else:
        k = _binomial_btrs(state, n, pp)
    if p > 0.5:
        k = n - k
    return np.int64(k)


def hypergeometric(population: int, successes: int, draws: int, rng: RngStream) -> int:
    """Successes seen in `draws` draws without replacement from `population`."""
    if not (0 <= successes <= population):
        raise ValueError(f"successes {successes} out of range for population {population}")
    if not (0 <= draws <= population):
        raise ValueError(f"draws {draws} out of range for population {population}")
    return int(
        hyper_kernel(
            rng.state,
            np.int64(successes),
            np.int64(population - successes),
            np.int64(draws),
        )
    )


def multivariate_hypergeometric(counts, draws: int, rng: RngStream, order=None):
    """Per-category counts of `draws` draws without replacement.

    `order` permutes the category visiting order (defaults to 0..len-1);
    sampling stops early once the budget is exhausted.
    """
    counts = np.asarray(counts, dtype=np.int64)
    total = int(counts.sum())
    if draws < 0 or draws > total:
        raise ValueError(f"draws {draws} out of range for total {total}")
    if np.any(counts < 0):
        raise ValueError("negative category count")
    if order is None:
        order = np.arange(counts.shape[0], dtype=np.int64)
    else:
        order = np.asarray(order, dtype=np.int64)
        if sorted(order.tolist()) != list(range(counts.shape[0])):
            raise ValueError("order must be a permutation of the categories")
    out = np.zeros(counts.shape[0], dtype=np.int64)
    mvhyper_kernel(rng.state, counts, np.int64(total), np.int64(draws), order, out)
    return out


def binomial(n: int, p: float, rng: RngStream) -> int:
    """Binomial(n, p) variate; used by randomized protocols for batch splits."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if not (0.0 <= p <= 1.0):
        raise ValueError("p must be in [0, 1]")
    return int(binomial_kernel(rng.state, np.int64(n), float(p)))
