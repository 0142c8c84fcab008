"""Command line front end: popsim run | bench | verify.

run     executes independent repetitions and writes one snapshot CSV per run
        (header t,count_0,...,count_{q-1}) plus a manifest.json echoing the
        fully resolved experiment, so any output can be reproduced exactly.
bench   measures nanoseconds per interaction (pure simulation loop, setup
        excluded) and reports median/sd over repetitions as a CSV.
verify  runs every simulator on a tiny instance and compares final-
        configuration histograms against the exact Markov-chain oracle.

Seeds for run i derive from (master seed, i) through a fixed mixing
function, so serial and threaded execution write identical files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .drivers import SIMULATORS, simulate, verify_against_oracle
from .protocols import PROTOCOL_NAMES, default_initial_counts, make_protocol
from .rng import spawn_seed
from .sequential import Heuristics

BENCH_HEADER = ("simulator,protocol,n,q,threads,"
                "ns_per_interaction_median,ns_per_interaction_sd")


@dataclass
class ExperimentSpec:
    """Fully resolved experiment; serializes to/from the manifest."""

    protocol: str
    simulator: str
    n: int
    interactions: int
    states: int | None = None
    snapshot_every: int | None = None
    seed: int = 0
    reps: int = 1
    threads: int = 1
    heuristics: list[str] = field(default_factory=lambda: ["renaming",
                                                           "partitioning",
                                                           "skipping"])
    table_seed: int = 0
    marked: int | None = None
    out: str | None = None

    def __post_init__(self):
        if self.protocol not in PROTOCOL_NAMES:
            raise ValueError(f"unknown protocol {self.protocol!r}")
        if self.simulator not in SIMULATORS:
            raise ValueError(f"unknown simulator {self.simulator!r}")
        for name, low in (("n", 2), ("interactions", 0), ("reps", 1),
                          ("threads", 1)):
            if getattr(self, name) < low:
                raise ValueError(f"{name} must be at least {low}")
        if self.snapshot_every is not None and self.snapshot_every < 1:
            raise ValueError("snapshot-every must be at least 1")
        proto = self.build_protocol()
        if self.simulator == "seq-alias" and proto.q ** 2 > self.n:
            raise ValueError(
                f"seq-alias needs n >= q**2 = {proto.q ** 2} (got n={self.n})")

    def build_protocol(self):
        return make_protocol(self.protocol, self.states, self.table_seed)

    def build_heuristics(self) -> Heuristics:
        return Heuristics.from_names(self.heuristics)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        return cls(**data)


def _write_csv(path: str, rows: list[tuple[int, np.ndarray]], q: int) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("t," + ",".join(f"count_{i}" for i in range(q)) + "\n")
        for t, counts in rows:
            fh.write(str(int(t)) + "," + ",".join(str(int(c)) for c in counts)
                     + "\n")


def _initial(spec: ExperimentSpec, protocol):
    return default_initial_counts(spec.protocol, protocol, spec.n, spec.marked)


def _one_run(spec: ExperimentSpec, protocol, initial, heur, run_index: int):
    rows: list[tuple[int, np.ndarray]] = []
    result = simulate(spec.simulator, protocol, initial, spec.interactions,
                      spawn_seed(spec.seed, run_index), heur,
                      spec.snapshot_every,
                      sink=lambda t, c: rows.append((t, c)))
    return run_index, rows, result


def cmd_run(spec: ExperimentSpec) -> int:
    protocol = spec.build_protocol()
    heur = spec.build_heuristics()
    initial = _initial(spec, protocol)
    out_dir = spec.out or "."
    os.makedirs(out_dir, exist_ok=True)

    def job(i):
        return _one_run(spec, protocol, initial, heur, i)

    if spec.threads > 1:
        with ThreadPoolExecutor(max_workers=spec.threads) as pool:
            results = list(pool.map(job, range(spec.reps)))
    else:
        results = [job(i) for i in range(spec.reps)]
    width = max(4, len(str(spec.reps - 1)))
    for run_index, rows, _ in results:
        _write_csv(os.path.join(out_dir, f"run_{run_index:0{width}d}.csv"),
                   rows, protocol.q)
    manifest = dict(spec.to_dict(), q=protocol.q,
                    run_seeds=[spawn_seed(spec.seed, i) for i in range(spec.reps)])
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {spec.reps} run file(s) and manifest.json to {out_dir}")
    return 0


def bench_simulator(spec: ExperimentSpec, warmup: bool = True):
    """Per-interaction timings for one spec; returns (median_ns, sd_ns)."""
    protocol = spec.build_protocol()
    heur = spec.build_heuristics()
    initial = _initial(spec, protocol)
    if warmup:  # compile kernels and populate lookup tables off the clock
        simulate(spec.simulator, protocol, initial,
                 min(spec.interactions, 4096), spawn_seed(spec.seed, 2 ** 32),
                 heur)

    def job(i):
        res = simulate(spec.simulator, protocol, initial, spec.interactions,
                       spawn_seed(spec.seed, i), heur)
        return res.loop_seconds / max(res.interactions, 1) * 1e9

    if spec.threads > 1:
        with ThreadPoolExecutor(max_workers=spec.threads) as pool:
            ns = list(pool.map(job, range(spec.reps)))
    else:
        ns = [job(i) for i in range(spec.reps)]
    return float(np.median(ns)), float(np.std(ns))


def cmd_bench(spec: ExperimentSpec) -> int:
    if spec.reps < 5:
        raise ValueError("bench needs at least 5 repetitions")
    protocol = spec.build_protocol()
    median, sd = bench_simulator(spec)
    row = (f"{spec.simulator},{spec.protocol},{spec.n},{protocol.q},"
           f"{spec.threads},{median:.3f},{sd:.3f}")
    print(BENCH_HEADER)
    print(row)
    if spec.out:
        os.makedirs(spec.out, exist_ok=True)
        path = os.path.join(spec.out, "bench.csv")
        fresh = not os.path.exists(path)
        with open(path, "a", newline="\n") as fh:
            if fresh:
                fh.write(BENCH_HEADER + "\n")
            fh.write(row + "\n")
        print(f"appended to {path}")
    return 0


def cmd_verify(spec: ExperimentSpec) -> int:
    if spec.n > 8:
        raise ValueError("verify mode supports n <= 8")
    if spec.interactions > 10:
        raise ValueError("verify mode supports horizons <= 10")
    protocol = spec.build_protocol()
    heur = spec.build_heuristics()
    initial = _initial(spec, protocol)
    # every simulator is checked; the alias urn runs undersized at oracle
    # scale, which trades its O(1) bound for exactness of the comparison
    sims = list(SIMULATORS)
    reports = verify_against_oracle(protocol, initial, spec.interactions,
                                    spec.reps, spec.seed, sims, heur,
                                    threads=spec.threads)
    ok = True
    for rep in reports:
        verdict = "pass" if rep.passed else "FAIL"
        print(f"{rep.simulator:14s} TV={rep.total_variation:.5f} "
              f"(limit {rep.tv_threshold:.5f})  chi2 p={rep.p_value:.4f}  "
              f"[{verdict}]")
        ok &= rep.passed
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="popsim",
        description="Population protocol simulators: sequential and batched.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("run", "simulate and write snapshot CSVs"),
                            ("bench", "measure ns per interaction"),
                            ("verify", "compare simulators to the exact oracle")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--protocol", default="leader-election",
                       choices=PROTOCOL_NAMES)
        p.add_argument("--simulator", default="seq-bst", choices=SIMULATORS)
        p.add_argument("--agents", "-n", type=int, default=1024,
                       help="population size n")
        p.add_argument("--interactions", "-N", type=int, default=1024,
                       help="interactions to simulate (verify: horizon)")
        p.add_argument("--states", type=int, default=None,
                       help="state count |Q| where the protocol allows it")
        p.add_argument("--snapshot-every", type=int, default=None)
        p.add_argument("--seed", type=int, default=1)
        p.add_argument("--reps", type=int, default=None,
                       help="independent repetitions")
        p.add_argument("--threads", type=int,
                       default=int(os.environ.get("POPSIM_THREADS", "1")))
        p.add_argument("--heuristics", type=str,
                       default="renaming,partitioning,skipping",
                       help="comma list of renaming,partitioning,skipping,"
                            "controller,prefetch (empty string disables all)")
        p.add_argument("--table-seed", type=int, default=0,
                       help="table seed for random-two-way")
        p.add_argument("--marked", type=int, default=None,
                       help="marked agents for running-clock (default sqrt(n))")
        p.add_argument("--out", type=str, default=None, help="output directory")
    return parser


def spec_from_args(args) -> ExperimentSpec:
    default_reps = {"run": 1, "bench": 5, "verify": 100_000}[args.command]
    return ExperimentSpec(
        protocol=args.protocol,
        simulator=args.simulator,
        n=args.agents,
        interactions=args.interactions,
        states=args.states,
        snapshot_every=args.snapshot_every,
        seed=args.seed,
        reps=args.reps if args.reps is not None else default_reps,
        threads=args.threads,
        heuristics=[h for h in args.heuristics.split(",") if h.strip()],
        table_seed=args.table_seed,
        marked=args.marked,
        out=args.out,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = spec_from_args(args)
        start = time.perf_counter()
        code = {"run": cmd_run, "bench": cmd_bench, "verify": cmd_verify}[
            args.command](spec)
        print(f"done in {time.perf_counter() - start:.2f}s", file=sys.stderr)
        return code
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
