#!/usr/bin/env python3
"""
Test the freshlab command line end to end
"""

import csv
import json
import math
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from freshlab.cli import main
from freshlab.commands import command_discovery
from freshlab.commands import simulate as simulate_module
from freshlab.output import SWEEP_FIELDS
from freshlab.simcore import StalenessViolation

SMALL_WORKLOAD = [
    "--set", "workload.lam=50",
    "--set", "workload.num_keys=50",
    "--set", "workload.duration=20",
    "-q",
]

UNIT_COSTS = [
    "--set", "costs.bottleneck=custom",
    "--set", "costs.c_update=0.5",
    "--set", "costs.c_invalidate=0.1",
    "--set", "costs.c_miss=1",
]


def _read_csv(path: Path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_commands_discovered():
    print("=" * 60)
    print("TEST: Command Discovery")
    print("=" * 60)

    names = sorted(command_discovery.discover())
    assert names == ["model", "simulate", "sketch-bench", "sweep"], names

    print(f"✓ Commands: {', '.join(names)}")


def test_usage_errors():
    print("\n" + "=" * 60)
    print("TEST: Usage Errors Exit With 1")
    print("=" * 60)

    with tempfile.TemporaryDirectory() as tmp:
        out = ["--out-dir", tmp]
        cases = [
            [],
            ["teleport"],
            ["model", "--bogus"],
            ["model", "--set", "lam=5", *out],
            ["model", "--config", str(Path(tmp) / "missing.ini"), *out],
            ["model", "--set", "model.policies=opt", *out],
            ["simulate", "--set", "sim.staleness_bounds=0.1 1", *SMALL_WORKLOAD, *out],
            ["simulate", "--set", "sim.policies=lru", *SMALL_WORKLOAD, *out],
            ["simulate", "--workers", "0", *SMALL_WORKLOAD, *out],
            ["sketch-bench", "--set", "sketch.estimators=exact", *SMALL_WORKLOAD, *out],
            ["sketch-bench", "--set", "sketch.estimators=exact exact", *SMALL_WORKLOAD, *out],
        ]
        for argv in cases:
            code = main(argv)
            assert code == 1, f"{argv} exited with {code}"
            print(f"  {' '.join(argv[:3])} ... -> 1")

    print(f"✓ {len(cases)} bad invocations rejected")


def test_runtime_errors():
    print("\n" + "=" * 60)
    print("TEST: Runtime Errors Exit With 2")
    print("=" * 60)

    with tempfile.TemporaryDirectory() as tmp:
        out = ["--out-dir", tmp]
        bad_estimator = ["sketch-bench", "--set", "sketch.estimators=exact bloom", *SMALL_WORKLOAD, *out]
        assert main(bad_estimator) == 2
        missing_trace = [
            "simulate",
            "--set", "workload.kind=trace",
            "--set", f"workload.path={Path(tmp) / 'missing.csv'}",
            "-q",
            *out,
        ]
        assert main(missing_trace) == 2

    print("✓ Estimator and trace failures are runtime errors")


def test_model_command():
    print("\n" + "=" * 60)
    print("TEST: model Command")
    print("=" * 60)

    with tempfile.TemporaryDirectory() as tmp:
        argv = [
            "model",
            "--set", "model.lam=1",
            "--set", "model.r=0.9",
            "--set", "model.staleness_bounds=0.1",
            "--out-dir", tmp,
            "-q",
            *UNIT_COSTS,
        ]
        assert main(argv) == 0
        rows = {row["policy"]: row for row in _read_csv(Path(tmp) / "model.csv")}

        assert sorted(rows) == ["invalidate", "ttl-expiry", "ttl-polling", "update"]
        assert abs(float(rows["ttl-expiry"]["c_f"]) - 0.086) / 0.086 < 1e-3, rows["ttl-expiry"]
        assert abs(float(rows["update"]["c_f"]) - 0.0049751) < 1e-6, rows["update"]
        assert float(rows["ttl-polling"]["c_f"]) == 1.0, "one poll when T' = T"
        assert float(rows["update"]["c_s"]) == 0.0 and rows["update"]["cold_misses"] == "0"

        assert main(["model", "--format", "json", "--out-dir", tmp, "-q"]) == 0
        document = json.loads((Path(tmp) / "model.json").read_text(encoding="utf-8"))
        assert len(document["rows"]) == 9 * 4, "default grid is 9 bounds x 4 policies"

    print("✓ Closed-form table written")


def test_simulate_command():
    print("\n" + "=" * 60)
    print("TEST: simulate Command")
    print("=" * 60)

    with tempfile.TemporaryDirectory() as first, tempfile.TemporaryDirectory() as second:
        extras = ["--set", "output.transcript=true", "--set", "output.per_key=true", "--seed", "5"]
        assert main(["simulate", "--out-dir", first, *SMALL_WORKLOAD, *extras]) == 0
        assert main(["simulate", "--out-dir", second, *SMALL_WORKLOAD, *extras]) == 0

        table = Path(first) / "simulate.csv"
        rows = _read_csv(table)
        assert [row["policy"] for row in rows] == [
            "ttl-expiry",
            "ttl-polling",
            "update",
            "invalidate",
            "adaptive",
            "adaptive-cs",
            "opt",
        ], "one row per configured policy, in order"
        assert all(float(row["T"]) == 0.1 for row in rows)
        reads = {row["reads"] for row in rows}
        assert len(reads) == 1, "every policy sees the same reads"
        by_policy = {row["policy"]: row for row in rows}
        assert by_policy["update"]["stale_misses"] == "0", "updates keep every copy fresh"
        assert int(by_policy["ttl-expiry"]["stale_misses"]) > 0

        seeded = table.read_bytes()
        assert seeded == (Path(second) / "simulate.csv").read_bytes(), "same seed, same bytes"
        assert (Path(first) / "simulate_per_key.csv").exists()
        transcripts = sorted((Path(first) / "transcripts").iterdir())
        assert len(transcripts) == 7, [t.name for t in transcripts]
        assert [t.read_bytes() for t in transcripts] == [
            t.read_bytes() for t in sorted((Path(second) / "transcripts").iterdir())
        ]

    with tempfile.TemporaryDirectory() as other:
        assert main(["simulate", "--out-dir", other, *SMALL_WORKLOAD, "--seed", "6"]) == 0
        assert (Path(other) / "simulate.csv").read_bytes() != seeded, "seed changes the run"

    print(f"✓ {len(rows)} policies, byte-identical reruns")


def test_audit_failure_exit_code():
    print("\n" + "=" * 60)
    print("TEST: Audit Violations Exit With 3")
    print("=" * 60)

    real_audit = simulate_module.audit_staleness

    def failing_audit(transcript, staleness_bound):
        return [StalenessViolation(seq=0, key="k", serve_time=5.0, version_time=0.0, write_time=1.0)]

    simulate_module.audit_staleness = failing_audit
    try:
        with tempfile.TemporaryDirectory() as tmp:
            argv = ["simulate", "--set", "sim.policies=update invalidate", "--out-dir", tmp, *SMALL_WORKLOAD]
            assert main(argv) == 3
            assert (Path(tmp) / "simulate.csv").exists(), "results still written"
    finally:
        simulate_module.audit_staleness = real_audit

    print("✓ Violations fail the run")


def test_sweep_command():
    print("\n" + "=" * 60)
    print("TEST: sweep Command")
    print("=" * 60)

    with tempfile.TemporaryDirectory() as tmp:
        argv = [
            "sweep",
            "--set", "sim.t_points=3",
            "--set", "sim.t_min=0.05",
            "--set", "sim.t_max=0.5",
            "--set", "sim.policies=ttl-expiry update adaptive opt",
            "--format", "json",
            "--out-dir", tmp,
            *SMALL_WORKLOAD,
        ]
        assert main(argv) == 0
        document = json.loads((Path(tmp) / "sweep.json").read_text(encoding="utf-8"))

    assert document["columns"] == list(SWEEP_FIELDS)
    rows = document["rows"]
    assert len(rows) == 3 * 4
    assert [row["policy"] for row in rows[:4]] == ["ttl-expiry", "update", "adaptive", "opt"], "T-major"
    assert rows[0]["T"] < rows[4]["T"] < rows[8]["T"]
    for row in rows:
        if row["policy"] == "opt":
            assert row["model_c_f"] is None, "no closed form for opt"
        else:
            assert row["model_c_f"] is not None and row["model_c_f"] >= 0, row
    update = [row for row in rows if row["policy"] == "update"]
    assert all(row["model_c_s"] == 0.0 for row in update)

    with tempfile.TemporaryDirectory() as tmp:
        argv = ["sweep", "--set", "sim.staleness_bounds=0.1 1", "--format", "gnuplot", "--out-dir", tmp, *SMALL_WORKLOAD]
        assert main(argv) == 0
        written = sorted(p.name for p in Path(tmp).iterdir())
        assert written == ["sweep.csv", "sweep.dat", "sweep.gp"], written

    print("✓ Simulated and model columns side by side")


def test_sketch_bench_command():
    print("\n" + "=" * 60)
    print("TEST: sketch-bench Command")
    print("=" * 60)

    outputs = []
    for _ in range(2):
        with tempfile.TemporaryDirectory() as tmp:
            argv = [
                "sketch-bench",
                "--set", "sketch.estimators=exact; cms:d=2,w=64; topk:k=5,w=64",
                "--seed", "3",
                "--out-dir", tmp,
                *SMALL_WORKLOAD,
            ]
            assert main(argv) == 0
            path = Path(tmp) / "sketch_bench.csv"
            outputs.append(path.read_bytes())
            rows = _read_csv(path)

    assert outputs[0] == outputs[1], "default output is reproducible"
    assert [row["estimator"] for row in rows] == ["exact", "cms:d=2,w=64", "topk:k=5,w=64"]
    assert float(rows[0]["agreement"]) == 1.0
    for row in rows:
        assert 0.0 <= float(row["agreement"]) <= 1.0
        assert float(row["ns_per_record"]) == 0.0, "timing is off by default"
        assert not math.isnan(float(row["bytes"]))

    with tempfile.TemporaryDirectory() as tmp:
        argv = ["sketch-bench", "--set", "sketch.timing=true", "--out-dir", tmp, *SMALL_WORKLOAD]
        assert main(argv) == 0
        timed = _read_csv(Path(tmp) / "sketch_bench.csv")
        assert all(float(row["ns_per_record"]) > 0.0 for row in timed), timed

    print("✓ Three estimators benchmarked")


if __name__ == "__main__":
    test_commands_discovered()
    test_usage_errors()
    test_runtime_errors()
    test_model_command()
    test_simulate_command()
    test_audit_failure_exit_code()
    test_sweep_command()
    test_sketch_bench_command()
    print("\n✓ All CLI tests passed")
