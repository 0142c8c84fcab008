"""The run-length distribution behind the batched simulators.

How many agents can be drawn uniformly before one repeats?  With r agents
already seen the answer follows a birthday-problem law with closed-form pmf
and survival function; sampling inverts the survival function numerically.

Run:  python3 demos/02_collision_free_runs.py
"""

import math

import numpy as np

from popsim import RngStream, mean_run_length, run_length_pmf, sample_run_lengths

rng = RngStream(7)

print("pmf of the run length for n=30, r=6 (first few terms):")
for k in range(6):
    bar = "#" * int(200 * run_length_pmf(30, 6, k))
    print(f"  P[len={k}] = {run_length_pmf(30, 6, k):.4f} {bar}")

print()
print("sampled vs exact mean, and the sqrt(n) law for fresh populations:")
for n in (100, 10_000, 1_000_000):
    draws = sample_run_lengths(n, 0, 50_000, rng)
    print(f"  n={n:>9}: sample mean {draws.mean():9.2f}   exact "
          f"{mean_run_length(n, 0):9.2f}   sqrt(n) = {math.sqrt(n):9.2f}")

print()
print("with r agents prescribed the mean drops toward n/r:")
for r in (100, 500, 2000):
    n = 10_000
    draws = sample_run_lengths(n, r, 50_000, rng)
    print(f"  n={n}, r={r:>5}: sample mean {draws.mean():8.2f}   n/r = {n / r:8.2f}")

print()
print("ordered-pair variant (initiator/responder draws never self-pair):")
print("  n=2 fresh: run length is always",
      np.unique(sample_run_lengths(2, 0, 1000, rng, ordered_pairs=True)))
