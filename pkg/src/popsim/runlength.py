"""Distribution of the length of a collision-free run of agent draws.

A run counts the leading draws of a uniform agent sequence in which no agent
repeats, with `r` agents already seen up front; the (length + 1)-th draw is
the collision.  The pmf is

    P[len = k] = (r + k)/n * prod_{i=0}^{k-1} (n - r - i)/n,

with support {0, ..., n - r} (the k = 0 term carries mass r/n and is what
makes the distribution normalize, so it is kept).  The survival function is
evaluated in log space through log-gamma:

    P[len > t] = exp(lgamma(n-r+1) - lgamma(n-r-t) - (t+1) * log(n)).

Two variants are provided.  The default treats draws as fully independent.
With ``ordered_pairs=True`` the draws come in interaction pairs whose second
member can never equal its partner (the initiator/responder scheduler used by
the simulators); even-positioned draws are then uniform over n - 1 agents,
which shifts the law noticeably for small n.  The batched simulators use the
ordered-pairs variant so that they agree exactly with sequential stepping.

Sampling inverts the survival function numerically: a per-population lookup
table of brackets indexed by survival-quantile band and seen-count band
jump-starts a bisection/regula-falsi search on the monotone log survival
function, which stops when the bracket collapses to a single integer.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .rng import RngStream, next_double

_LGAMMA_DIRECT_LIMIT = 1 << 26  # below this, plain lgamma differences are exact enough


@njit(cache=True)
def _stirling_tail(z):
    zz = z * z
    return (1.0 / 12.0 - (1.0 / 360.0 - 1.0 / (1260.0 * zz)) / zz) / z


@njit(cache=True)
def ln_sf_kernel(n, r, t, pair):
    """log P[len > t] for integer t; 0 for t < 0, -inf at the support edge."""
    if t < 0:
        return 0.0
    m = n - r
    if t >= m:
        return -math.inf
    nf = float(n)
    tf = float(t)
    mf = float(m)
    if n <= _LGAMMA_DIRECT_LIMIT:
        base = (
            math.lgamma(mf + 1.0)
            - math.lgamma(mf - tf)
            - (tf + 1.0) * math.log(nf)
        )
    else:
        # difference form: the log(n) terms cancel exactly, avoiding the
        # catastrophic cancellation of huge lgamma values
        a = math.log1p((1.0 - r) / nf)
        b = math.log1p(-(r + tf) / nf)
        base = (
            (mf + 0.5) * a
            - (mf - tf - 0.5) * b
            - (tf + 1.0)
            + _stirling_tail(mf + 1.0)
            - _stirling_tail(mf - tf)
        )
    if pair:
        # even-positioned draws are uniform over n-1 agents instead of n
        base -= ((t + 1) // 2) * math.log1p(-1.0 / nf)
    return base


@njit(cache=True)
def sf_kernel(n, r, t, pair):
    return math.exp(ln_sf_kernel(n, r, t, pair))


@njit(cache=True)
def pmf_kernel(n, r, k, pair):
    if k < 0 or k > n - r:
        return 0.0
    sf_prev = 1.0 if k == 0 else math.exp(ln_sf_kernel(n, r, k - 1, pair))
    if pair and k % 2 == 1:
        if n < 2:
            return 0.0
        collide = (r + k - 1.0) / (n - 1.0)
    else:
        collide = (r + k) / float(n)
    return sf_prev * collide


@njit(cache=True)
def _min_support(r, pair):
    if r > 0:
        return np.int64(0)
    return np.int64(2) if pair else np.int64(1)


@njit(cache=True)
def sample_runlen_kernel(state, n, r, pair, bracket_lo, bracket_hi, r_edges):
    """Inverse-transform sample of the run length; one uniform consumed."""
    if r >= n:
        return np.int64(0)
    m = n - r
    v = 1.0 - next_double(state)  # survival target in (0, 1]
    support_min = _min_support(r, pair)
    if v >= 1.0:
        return support_min
    lnv = math.log(v)

    ub = int(-math.log2(v))
    if ub > 7:
        ub = 7
    rb = 0
    for i in range(8):
        if r >= r_edges[i]:
            rb = i
    lo = bracket_lo[ub, rb]
    hi = bracket_hi[ub, rb]
    if lo < support_min - 1:
        lo = support_min - 1
    if lo > m:
        lo = m
    if hi > m:
        hi = m
    if hi <= lo:
        hi = lo + 1

    if ln_sf_kernel(n, r, lo, pair) <= lnv:
        hi = lo
        lo = support_min - 1
    while ln_sf_kernel(n, r, hi, pair) > lnv:
        lo = hi
        hi = hi * 2 + 4
        if hi >= m:
            hi = m
            break

    glo = ln_sf_kernel(n, r, lo, pair) - lnv
    ghi = ln_sf_kernel(n, r, hi, pair) - lnv
    if hi - lo > 2:
        # warm start from -ln v ~ r*t/n + t*(t+1)/(2n), the leading terms of
        # the log survival function
        disc = (2.0 * r + 1.0) ** 2 - 8.0 * n * lnv
        tg = np.int64((math.sqrt(disc) - (2.0 * r + 1.0)) * 0.5)
        if tg <= lo:
            tg = lo + 1
        elif tg >= hi:
            tg = hi - 1
        g = ln_sf_kernel(n, r, tg, pair) - lnv
        if g > 0.0:
            lo = tg
            glo = g
        else:
            hi = tg
            ghi = g
    bisect = False
    while hi - lo > 1:
        if bisect or not math.isfinite(ghi):
            mid = (lo + hi) // 2
        else:
            mid = lo + np.int64((hi - lo) * (glo / (glo - ghi)))
            if mid <= lo:
                mid = lo + 1
            elif mid >= hi:
                mid = hi - 1
        g = ln_sf_kernel(n, r, mid, pair) - lnv
        if g > 0.0:
            lo = mid
            glo = g
        else:
            hi = mid
            ghi = g
        bisect = not bisect
    return hi


@njit(cache=True)
def mean_runlen_kernel(n, r, pair):
    """E[len] by direct summation of the survival function."""
    total = 0.0
    t = np.int64(0)
    m = n - r
    while t < m:
        s = sf_kernel(n, r, t, pair)
        total += s
        if s < 1e-17:
            break
        t += 1
    return total


def _solve_quantile(n: int, r: int, v: float, pair: bool) -> int:
    """Smallest t with sf(t) <= v, by plain bisection (table construction)."""
    if v <= 0.0:
        return n - r
    if v >= 1.0:
        return int(_min_support(np.int64(r), pair))
    lnv = math.log(v)
    lo, hi = -1, n - r
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ln_sf_kernel(np.int64(n), np.int64(r), np.int64(mid), pair) > lnv:
            lo = mid
        else:
            hi = mid
    return hi


_TABLE_CACHE: dict = {}


def run_length_table(n: int, ordered_pairs: bool = False):
    """Bracket lookup table for the numeric inversion, cached per population.

    64 cells: 8 survival-quantile bands (v in (2^-b-1, 2^-b], last band open
    below) times 8 seen-count bands, each holding a [lo, hi] search bracket.
    """
    key = (int(n), bool(ordered_pairs))
    cached = _TABLE_CACHE.get(key)
    if cached is not None:
        return cached
    root = max(1, int(math.isqrt(n)))
    raw_edges = [0, 1, max(2, root // 4), max(3, root // 2), root,
                 2 * root, 4 * root, 16 * root]
    edges = []
    for e in raw_edges:
        e = min(e, n)
        if not edges or e > edges[-1]:
            edges.append(e)
    while len(edges) < 8:
        edges.append(n)
    r_edges = np.array(edges[:8], dtype=np.int64)

    lo = np.empty((8, 8), dtype=np.int64)
    hi = np.empty((8, 8), dtype=np.int64)
    for ub in range(8):
        v_hi = 2.0 ** (-ub)
        v_lo = 0.0 if ub == 7 else 2.0 ** (-ub - 1)
        for rb in range(8):
            r_lo = int(r_edges[rb])
            r_hi = n if rb == 7 else max(r_lo, int(r_edges[rb + 1]) - 1)
            r_hi = min(r_hi, n)
            lo[ub, rb] = _solve_quantile(n, r_hi, v_hi, ordered_pairs) - 1
            hi[ub, rb] = _solve_quantile(n, r_lo, v_lo, ordered_pairs)
    table = (lo, hi, r_edges)
    _TABLE_CACHE[key] = table
    return table


def _check_params(n: int, r: int, ordered_pairs: bool = False) -> None:
    if n < 1:
        raise ValueError("population must contain at least one agent")
    if ordered_pairs and n < 2:
        raise ValueError("ordered-pair draws need at least two agents")
    if not (0 <= r <= n):
        raise ValueError(f"seen count {r} out of range for population {n}")


def run_length_pmf(n: int, r: int, k: int, ordered_pairs: bool = False) -> float:
    """P[len = k] for the collision-free run length with r agents seen."""
    _check_params(n, r, ordered_pairs)
    return float(pmf_kernel(np.int64(n), np.int64(r), np.int64(k), ordered_pairs))


def run_length_sf(n: int, r: int, t: int, ordered_pairs: bool = False) -> float:
    """P[len > t]; 1 for t < 0 and 0 from the support edge on."""
    _check_params(n, r, ordered_pairs)
    return float(sf_kernel(np.int64(n), np.int64(r), np.int64(t), ordered_pairs))


def sample_run_length(n: int, r: int, rng: RngStream, ordered_pairs: bool = False) -> int:
    """Draw a run length; expected O(log n) survival evaluations per sample."""
    _check_params(n, r, ordered_pairs)
    lo, hi, r_edges = run_length_table(n, ordered_pairs)
    return int(
        sample_runlen_kernel(
            rng.state, np.int64(n), np.int64(r), ordered_pairs, lo, hi, r_edges
        )
    )


def mean_run_length(n: int, r: int, ordered_pairs: bool = False) -> float:
    """Exact E[len] by summing the survival function (reference/tests)."""
    _check_params(n, r, ordered_pairs)
    return float(mean_runlen_kernel(np.int64(n), np.int64(r), ordered_pairs))


@njit(cache=True, nogil=True)
def _sample_many_kernel(state, n, r, pair, lo, hi, redges, out):
    for i in range(out.shape[0]):
        out[i] = sample_runlen_kernel(state, n, r, pair, lo, hi, redges)


def sample_run_lengths(n: int, r: int, count: int, rng: RngStream,
                       ordered_pairs: bool = False) -> np.ndarray:
    """Bulk draw of `count` run lengths from one stream (histogram tests)."""
    _check_params(n, r, ordered_pairs)
    lo, hi, r_edges = run_length_table(n, ordered_pairs)
    out = np.empty(count, dtype=np.int64)
    _sample_many_kernel(rng.state, np.int64(n), np.int64(r), ordered_pairs,
                        lo, hi, r_edges, out)
    return out
