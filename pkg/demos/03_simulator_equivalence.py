"""All six simulators agree with the exact Markov chain on tiny instances.

Leader election from an all-leader start: after a handful of interactions
the exact distribution over leader counts is computable by propagating the
chain, and every simulator reproduces it.

Run:  python3 demos/03_simulator_equivalence.py
"""

from popsim import (
    SIMULATORS,
    exact_distribution,
    leader_election,
    simulate_many,
    total_variation,
)

protocol = leader_election()
initial = [0, 4]  # four leaders
horizon = 6
reps = 100_000

exact = exact_distribution(protocol, tuple(initial), horizon)
print("exact leader-count distribution after", horizon, "interactions:")
for config, p in sorted(exact.items()):
    print(f"  followers={config[0]}, leaders={config[1]}: {p:.5f}")

print()
print(f"total variation of each simulator over {reps} seeded runs:")
for sim in SIMULATORS:
    outs = simulate_many(sim, protocol, initial, horizon, master_seed=11,
                         reps=reps, alias_undersized=True)
    emp = {}
    for row in outs:
        key = tuple(int(x) for x in row)
        emp[key] = emp.get(key, 0) + 1 / reps
    print(f"  {sim:>13}: TV = {total_variation(emp, exact):.5f}")
