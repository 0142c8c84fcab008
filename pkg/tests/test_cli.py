"""Command-line front end: files, reproducibility, verification."""

import json
import os

import numpy as np
import pytest

from popsim.cli import (
    BENCH_HEADER,
    ExperimentSpec,
    bench_simulator,
    cmd_bench,
    cmd_run,
    cmd_verify,
    main,
)
from popsim.drivers import simulate_many, verify_against_oracle
from popsim.oracle import compare_to_exact, exact_distribution
from popsim.protocols import leader_election


def _read(path):
    with open(path, "rb") as fh:
        return fh.read()


def test_run_writes_csv_and_manifest(tmp_path):
    spec = ExperimentSpec(protocol="identity", simulator="seq-bst", n=100,
                          interactions=1000, snapshot_every=1000, seed=7,
                          reps=2, out=str(tmp_path))
    assert cmd_run(spec) == 0
    csv0 = _read(tmp_path / "run_0000.csv").decode()
    lines = csv0.strip().split("\n")
    assert lines[0] == "t,count_0,count_1"
    assert lines[1] == "0,50,50"
    assert lines[2] == "1000,50,50"
    assert csv0.endswith("\n")
    manifest = json.loads(_read(tmp_path / "manifest.json"))
    assert manifest["protocol"] == "identity"
    assert len(manifest["run_seeds"]) == 2


def test_run_is_byte_identically_reproducible(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    for out in (out1, out2):
        spec = ExperimentSpec(protocol="leader-election", simulator="batched",
                              n=64, interactions=500, snapshot_every=100,
                              seed=99, reps=3, out=str(out))
        cmd_run(spec)
    for name in sorted(os.listdir(out1)):
        if name.endswith(".csv"):
            assert _read(out1 / name) == _read(out2 / name), name


def test_parallel_execution_matches_serial(tmp_path):
    serial, threaded = tmp_path / "s", tmp_path / "t"
    for out, threads in ((serial, 1), (threaded, 2)):
        spec = ExperimentSpec(protocol="leader-election", simulator="seq-bst",
                              n=128, interactions=2000, snapshot_every=500,
                              seed=5, reps=4, threads=threads, out=str(out))
        cmd_run(spec)
    for name in sorted(os.listdir(serial)):
        if name.endswith(".csv"):
            assert _read(serial / name) == _read(threaded / name), name


def test_threaded_simulate_many_is_permutation_free():
    le = leader_election()
    a = simulate_many("seq-bst", le, [0, 6], 8, master_seed=3, reps=40,
                      threads=1)
    b = simulate_many("seq-bst", le, [0, 6], 8, master_seed=3, reps=40,
                      threads=2)
    assert np.array_equal(a, b)  # identical order, not merely a permutation


def test_manifest_round_trips_to_equal_spec(tmp_path):
    spec = ExperimentSpec(protocol="uniform-clock", simulator="multibatched",
                          n=4096, interactions=4096, states=8, seed=12,
                          reps=1, heuristics=["renaming", "skipping"],
                          out=str(tmp_path))
    cmd_run(spec)
    manifest = json.loads(_read(tmp_path / "manifest.json"))
    manifest.pop("q")
    manifest.pop("run_seeds")
    assert ExperimentSpec.from_dict(manifest) == spec


def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec(protocol="nope", simulator="seq-bst", n=8, interactions=1)
    with pytest.raises(ValueError):
        ExperimentSpec(protocol="identity", simulator="warp", n=8, interactions=1)
    with pytest.raises(ValueError):
        ExperimentSpec(protocol="identity", simulator="seq-bst", n=1,
                       interactions=1)
    with pytest.raises(ValueError):
        # alias requires q^2 <= n
        ExperimentSpec(protocol="random-two-way", simulator="seq-alias", n=6,
                       interactions=1, states=3)
    ExperimentSpec(protocol="random-two-way", simulator="seq-alias", n=9,
                   interactions=1, states=3)


def test_bench_csv_schema(tmp_path):
    spec = ExperimentSpec(protocol="identity", simulator="seq-linear", n=256,
                          interactions=20_000, seed=3, reps=5,
                          out=str(tmp_path))
    assert cmd_bench(spec) == 0
    lines = _read(tmp_path / "bench.csv").decode().strip().split("\n")
    assert lines[0] == BENCH_HEADER
    fields = lines[1].split(",")
    assert fields[:5] == ["seq-linear", "identity", "256", "2", "1"]
    assert float(fields[5]) > 0 and float(fields[6]) >= 0


def test_bench_linearity_in_interactions():
    # doubling N at fixed n roughly doubles sequential wall time
    base = ExperimentSpec(protocol="uniform-clock", simulator="seq-bst",
                          states=8, n=1 << 14, interactions=1 << 19, seed=3,
                          reps=5)
    double = ExperimentSpec(protocol="uniform-clock", simulator="seq-bst",
                            states=8, n=1 << 14, interactions=1 << 20, seed=3,
                            reps=5)
    ns1, _ = bench_simulator(base)
    ns2, _ = bench_simulator(double)
    total1 = ns1 * base.interactions
    total2 = ns2 * double.interactions
    assert 1.6 <= total2 / total1 <= 2.4


def test_verify_passes_for_all_simulators(capsys):
    spec = ExperimentSpec(protocol="leader-election", simulator="seq-bst",
                          n=4, interactions=6, seed=3, reps=60_000)
    assert cmd_verify(spec) == 0
    out = capsys.readouterr().out
    assert out.count("[pass]") == 6
    assert "multibatched" in out


def test_verify_rejects_oracle_bounds():
    with pytest.raises(ValueError):
        cmd_verify(ExperimentSpec(protocol="leader-election",
                                  simulator="seq-bst", n=9, interactions=6))
    with pytest.raises(ValueError):
        cmd_verify(ExperimentSpec(protocol="leader-election",
                                  simulator="seq-bst", n=4, interactions=11))


def test_verify_negative_control_fails():
    # a deliberately biased sampler: final configurations taken from the
    # wrong horizon must be flagged by the same machinery
    le = leader_election()
    exact = exact_distribution(le, (0, 4), 6)
    outs = simulate_many("seq-bst", le, [0, 4], 5, master_seed=9, reps=60_000)
    tv, p = compare_to_exact([tuple(r) for r in outs], exact)
    assert tv > 0.01 or p < 1e-3
    reports = verify_against_oracle(le, [0, 4], 6, 60_000, 9,
                                    simulators=("seq-bst",))
    assert reports[0].passed  # the honest one still passes


def test_cli_main_run_and_errors(tmp_path):
    code = main(["run", "--protocol", "identity", "--agents", "50",
                 "--interactions", "100", "--seed", "1", "--out",
                 str(tmp_path / "o")])
    assert code == 0
    assert (tmp_path / "o" / "run_0000.csv").exists()
    assert main(["run", "--agents", "1"]) == 2  # invalid population
    assert main(["bench", "--reps", "2"]) == 2  # bench needs >= 5 reps


def test_env_var_thread_default(monkeypatch, tmp_path):
    monkeypatch.setenv("POPSIM_THREADS", "2")
    from popsim.cli import build_parser, spec_from_args
    args = build_parser().parse_args(
        ["run", "--protocol", "identity", "--agents", "16",
         "--interactions", "4", "--out", str(tmp_path)])
    assert spec_from_args(args).threads == 2
