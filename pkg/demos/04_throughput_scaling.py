"""Throughput of sequential vs batched simulation on the clock protocol.

The batched simulators process whole collision-free runs per step, so their
amortized time per interaction falls like 1/sqrt(n) while sequential
stepping stays flat.

Run:  python3 demos/04_throughput_scaling.py          (about a minute)
"""

from popsim import (
    Heuristics,
    phase_clock,
    simulate_batched,
    simulate_sequential,
    uniform_clock_counts,
)

protocol = phase_clock(4)  # |Q| = 8

print(f"{'n':>10} | {'seq-bst ns/int':>14} | {'multibatched ns/int':>19}")
print("-" * 51)
# warm the JIT so the table reflects steady-state speed
simulate_sequential(protocol, uniform_clock_counts(1 << 12, 4), 4096, 1)
simulate_batched(protocol, uniform_clock_counts(1 << 12, 4), 4096, 1,
                 mode="multibatched")

for exp in (16, 18, 20, 22):
    n = 1 << exp
    init = uniform_clock_counts(n, 4)
    seq = simulate_sequential(protocol, init, n, seed=3, backend="bst")
    mb = simulate_batched(protocol, init, n, seed=3, mode="multibatched")
    print(f"2^{exp:>8} | {seq.loop_seconds / n * 1e9:14.1f} | "
          f"{mb.loop_seconds / n * 1e9:19.2f}")

print()
print("heuristic toggles (renaming / partitioning / skipping) change speed,")
print("never results; the controller adapts the epoch length online:")
n = 1 << 22
init = uniform_clock_counts(n, 4)
for flags in (Heuristics(renaming=False, partitioning=False, skipping=False),
              Heuristics(),
              Heuristics(controller=True)):
    mb = simulate_batched(protocol, init, n, seed=3, mode="multibatched",
                          heuristics=flags)
    names = ",".join(flags.names()) or "none"
    print(f"  flags [{names:<42}] {mb.loop_seconds / n * 1e9:7.2f} ns/int")
