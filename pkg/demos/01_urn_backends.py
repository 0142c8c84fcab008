"""Tour of the four urn backends and the dynamic alias table's internals.

Run:  python3 demos/01_urn_backends.py
"""

import numpy as np

from popsim import RngStream, make_urn

counts = [13, 5, 0, 8, 4]  # five states, one of them empty
rng = RngStream(2024)

print("configuration:", counts, "-> n =", sum(counts))
print()

for backend in ("array", "linear", "bst", "alias"):
    kwargs = {"allow_undersized": True} if backend == "alias" else {}
    urn = make_urn(counts, backend, **kwargs)
    draws = np.zeros(5, dtype=int)
    for _ in range(30_000):
        draws[urn.sample_with_replacement(rng)] += 1
    print(f"{backend:>6}: empirical frequencies {np.round(draws / 30_000, 3)}"
          f"  (exact {np.round(np.array(counts) / 30, 3)})")

print()
print("alias table internals (integer Vose build):")
urn = make_urn(counts, "alias", allow_undersized=True)
print("  first-entry weights F:", urn.F)
print("  alias weights       S:", urn.S)
print("  alias colors        A:", urn.A)
print("  row weights:", urn.row_weights(), " (floor/ceil of n/k)")

print()
print("sampling without replacement drains the urn back to its multiset:")
drained = np.zeros(5, dtype=int)
while urn.total() > 0:
    drained[urn.sample_without_replacement(rng)] += 1
print("  drained:", drained, " rebuilds along the way:", urn.rebuilds)
