"""Writing your own protocols: a 3-state majority and a randomized clock.

Deterministic protocols are just (q, q, 2) transition tables; randomized
ones subclass Protocol and implement apply/batch_apply (the batch form is
told how often a state pair interacts and assigns 2*num output agents).

Run:  python3 demos/05_custom_protocols.py
"""

import numpy as np

from popsim import CoinIncrementProtocol, Protocol, simulate_batched

# three-state majority: undecided agents adopt an opinion they meet,
# clashing opinions cancel through the undecided middle state
A, U, B = 0, 1, 2
table = np.empty((3, 3, 2), dtype=np.int64)
for i in range(3):
    for j in range(3):
        table[i, j] = (i, j)
table[A, B] = (A, U)   # initiator converts a clashing responder
table[B, A] = (B, U)
table[U, A] = (A, A)   # undecided initiators adopt the responder's opinion
table[U, B] = (B, B)
majority = Protocol(3, "three-state-majority", table)

n = 1 << 20
initial = np.array([n * 11 // 20, 0, n - n * 11 // 20])  # 55% A, 45% B
print(f"majority with n={n}: start A={initial[A]}, B={initial[B]}")
snapshots = []
simulate_batched(majority, initial, 40 * n, seed=9, mode="multibatched",
                 snapshot_every=8 * n,
                 sink=lambda t, c: snapshots.append((t, c)))
for t, c in snapshots:
    print(f"  t={t:>9}: A={c[A]:>8} U={c[U]:>8} B={c[B]:>8}")
winner = "A" if snapshots[-1][1][A] > snapshots[-1][1][B] else "B"
print("  majority opinion spreading:", winner)

print()
coin = CoinIncrementProtocol(4)
initial = np.array([1000, 0, 0, 0])
final = simulate_batched(coin, initial, 10_000, seed=4, mode="batched").counts
print("randomized coin-increment protocol after 10k interactions:", final)
print("(randomized protocols run through the object-level batch path)")
