"""Exact references and statistical comparison utilities.

For tiny instances the scheduler is a Markov chain on count vectors
(anonymous agents), so the full configuration distribution after any horizon
can be propagated exactly: from configuration c, the ordered state pair
(u, v) occurs with probability counts[u] * (counts[v] - [u == v]) / (n(n-1)).
These distributions are the ground truth for every simulator equivalence
test.  A second, independent brute-force path enumerates ordered agent
sequences and is used to cross-check the propagation itself.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy import stats

from .protocols import Protocol

MAX_CONFIGS = 100_000


def exact_distribution(protocol: Protocol, initial, horizon: int) -> dict:
    """Exact configuration distribution after `horizon` interactions.

    Keys are count tuples; values are probabilities.  Intended for n <= 8,
    q <= 3; raises once more than MAX_CONFIGS configurations are live.
    """
    initial = tuple(int(c) for c in initial)
    if len(initial) != protocol.q:
        raise ValueError("initial configuration length must equal state count")
    n = sum(initial)
    if n < 2:
        raise ValueError("need at least two agents to interact")
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    denom = n * (n - 1)
    dist = {initial: 1.0}
    for _ in range(horizon):
        nxt: dict = {}
        for config, p in dist.items():
            for u in range(protocol.q):
                cu = config[u]
                if cu == 0:
                    continue
                for v in range(protocol.q):
                    cv = config[v] - (1 if u == v else 0)
                    if cv <= 0:
                        continue
                    pair_p = p * cu * cv / denom
                    for (a, b), w in protocol.pair_outcomes(u, v):
                        succ = list(config)
                        succ[u] -= 1
                        succ[v] -= 1
                        succ[a] += 1
                        succ[b] += 1
                        key = tuple(succ)
                        nxt[key] = nxt.get(key, 0.0) + pair_p * w
        if len(nxt) > MAX_CONFIGS:
            raise ValueError(f"state space exceeded {MAX_CONFIGS} configurations")
        dist = nxt
    return dist


def brute_force_distribution(protocol: Protocol, initial, horizon: int) -> dict:
    """Independent oracle: enumerate every ordered agent-pair sequence.

    Exponential in the horizon; meant for n <= 4, horizon <= 3 cross-checks
    of `exact_distribution`.  Deterministic protocols only.
    """
    initial = tuple(int(c) for c in initial)
    n = sum(initial)
    agents = []
    for s, c in enumerate(initial):
        agents.extend([s] * c)
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    weight = 1.0 / len(pairs) ** horizon
    out: dict = {}
    for seq in itertools.product(pairs, repeat=horizon):
        states = list(agents)
        for (i, j) in seq:
            states[i], states[j] = protocol.apply(states[i], states[j])
        key = [0] * protocol.q
        for s in states:
            key[s] += 1
        key = tuple(key)
        out[key] = out.get(key, 0.0) + weight
    return out


def total_variation(a: dict, b: dict) -> float:
    """(1/2) sum |a - b| over the union of supports."""
    keys = set(a) | set(b)
    return 0.5 * sum(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in keys)


def empirical_distribution(samples) -> dict:
    """Normalize a sample of configuration tuples into a distribution."""
    out: dict = {}
    total = 0
    for key in samples:
        key = tuple(int(x) for x in key)
        out[key] = out.get(key, 0) + 1
        total += 1
    return {k: v / total for k, v in out.items()}


def chi_square_gof(observed, expected, total: int | None = None) -> float:
    """Chi-square goodness-of-fit p-value with small-bin pooling.

    `observed` are counts, `expected` probabilities summing to 1.  Bins with
    expected count below 5 are pooled into one; degenerate single-bin input
    gives p = 1.
    """
    observed = np.asarray(observed, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    if observed.shape != expected.shape:
        raise ValueError("observed and expected must align")
    if total is None:
        total = observed.sum()
    if not math.isclose(expected.sum(), 1.0, rel_tol=0, abs_tol=1e-6):
        raise ValueError("expected probabilities must sum to 1")
    exp_counts = expected * total
    keep = exp_counts >= 5
    obs = list(observed[keep])
    exp = list(exp_counts[keep])
    if not np.all(keep):
        obs.append(observed[~keep].sum())
        exp.append(exp_counts[~keep].sum())
    obs = np.asarray(obs)
    exp = np.asarray(exp)
    nonzero = exp > 0
    obs, exp = obs[nonzero], exp[nonzero]
    if len(obs) <= 1:
        return 1.0
    statistic = float(((obs - exp) ** 2 / exp).sum())
    dof = len(obs) - 1
    return float(stats.chi2.sf(statistic, dof))


def compare_to_exact(samples, exact: dict) -> tuple[float, float]:
    """(total variation, chi-square p) of sampled configurations vs oracle."""
    emp = empirical_distribution(samples)
    tv = total_variation(emp, exact)
    keys = sorted(set(emp) | set(exact))
    total = len(samples)
    observed = np.array([emp.get(k, 0.0) * total for k in keys])
    expected = np.array([exact.get(k, 0.0) for k in keys])
    # clip float dust so the pooled test sees a unit mass
    expected = np.clip(expected, 0.0, None)
    expected = expected / expected.sum()
    p = chi_square_gof(observed, expected, total)
    return tv, p
