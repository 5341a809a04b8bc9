#!/usr/bin/env python3
"""
Test workload generation and trace ingestion
"""

import sys
import tempfile
from pathlib import Path

import numpy as np
from scipy import stats

sys.path.insert(0, str(Path(__file__).parent))

from freshlab.errors import ParameterError
from freshlab.workload import (
    EventStream,
    MixtureWorkload,
    Op,
    PoissonWorkload,
    TraceFormatError,
    TraceWorkload,
    WorkloadError,
    estimate_all_key_params,
    estimate_key_params,
    generate,
    parse_trace,
    workload_spec_from_dict,
    zipf_probabilities,
)


def _write_trace(text: str) -> Path:
    handle = tempfile.NamedTemporaryFile("w", suffix=".csv", delete=False, encoding="utf-8")
    with handle:
        handle.write(text)
    return Path(handle.name)


def test_poisson_stream():
    print("=" * 60)
    print("TEST: Poisson Stream Statistics")
    print("=" * 60)

    spec = PoissonWorkload(lam=50.0, r=0.8, num_keys=1, duration=400.0, seed=1)
    stream = generate(spec)
    assert stream.duration == 400.0
    assert np.all(np.diff(stream.times) >= 0), "times must be nondecreasing"
    assert stream.times[-1] < 400.0, "no event past the horizon"

    n = len(stream)
    assert abs(n - 20_000) < 5 * np.sqrt(20_000), f"{n} events for an expected 20000"

    result = stats.kstest(np.diff(stream.times), "expon", args=(0, 1 / 50.0))
    assert result.pvalue > 0.001, f"inter-arrival KS p-value {result.pvalue}"

    reads = n - int(stream.is_write.sum())
    assert abs(reads / n - 0.8) < 5 * np.sqrt(0.16 / n), f"read fraction {reads / n}"

    print(f"✓ {n} events, KS p={result.pvalue:.3f}, read fraction {reads / n:.4f}")


def test_zipf_popularity():
    print("\n" + "=" * 60)
    print("TEST: Zipf Key Popularity")
    print("=" * 60)

    probs = zipf_probabilities(100, 1.3)
    assert abs(probs.sum() - 1.0) < 1e-12
    assert np.all(np.diff(probs) < 0), "rank 1 is the most popular"

    stream = generate(PoissonWorkload(lam=200.0, num_keys=100, zipf_s=1.3, duration=500.0, seed=4))
    counts = np.bincount(np.asarray(stream.keys), minlength=100)
    observed = counts / counts.sum()
    for rank in range(5):
        sigma = np.sqrt(probs[rank] * (1 - probs[rank]) / counts.sum())
        assert abs(observed[rank] - probs[rank]) < 5 * sigma, f"rank {rank}: {observed[rank]} vs {probs[rank]}"

    print(f"✓ top key share {observed[0]:.4f} (expected {probs[0]:.4f})")


def test_determinism():
    print("\n" + "=" * 60)
    print("TEST: Seeded Determinism")
    print("=" * 60)

    spec = PoissonWorkload(lam=20.0, r=0.7, num_keys=50, duration=100.0, seed=9)
    assert generate(spec).fingerprint() == generate(spec).fingerprint(), "same seed, same stream"
    other = PoissonWorkload(lam=20.0, r=0.7, num_keys=50, duration=100.0, seed=10)
    assert generate(spec).fingerprint() != generate(other).fingerprint(), "seed changes the stream"

    print("✓ Identical fingerprints for identical seeds")


def test_parameter_validation():
    print("\n" + "=" * 60)
    print("TEST: Workload Parameter Validation")
    print("=" * 60)

    for kwargs in (dict(lam=0.0), dict(r=1.2), dict(num_keys=0), dict(zipf_s=0.0), dict(duration=-1.0)):
        try:
            PoissonWorkload(**kwargs)
        except ParameterError:
            continue
        raise AssertionError(f"PoissonWorkload({kwargs}) should be rejected")

    component = PoissonWorkload(duration=10.0)
    for components in ((), ((0.5, component), (0.4, component)), ((-0.5, component), (1.5, component))):
        try:
            MixtureWorkload(components=components)
        except ParameterError:
            continue
        raise AssertionError(f"mixture {components} should be rejected")

    print("✓ Invalid workloads rejected")


def test_mixture():
    print("\n" + "=" * 60)
    print("TEST: Mixture Workload")
    print("=" * 60)

    read_heavy = PoissonWorkload(lam=100.0, r=0.95, num_keys=10, duration=200.0)
    write_heavy = PoissonWorkload(lam=100.0, r=0.2, num_keys=10, duration=200.0)
    spec = MixtureWorkload(components=((0.25, read_heavy), (0.75, write_heavy)), seed=5)
    stream = generate(spec)

    assert np.all(np.diff(stream.times) >= 0), "merged stream stays ordered"
    keys = np.asarray(stream.keys)
    first, second = keys < 10, keys >= 10
    assert keys.max() < 20, "components get disjoint key ranges"

    n_first, n_second = int(first.sum()), int(second.sum())
    assert abs(n_first - 5000) < 5 * np.sqrt(5000), f"first component had {n_first} events"
    assert abs(n_second - 15000) < 5 * np.sqrt(15000), f"second component had {n_second} events"

    first_reads = 1 - stream.is_write[first].mean()
    second_reads = 1 - stream.is_write[second].mean()
    assert abs(first_reads - 0.95) < 0.02 and abs(second_reads - 0.2) < 0.02, (first_reads, second_reads)

    reseeded = MixtureWorkload(
        components=((0.25, PoissonWorkload(lam=100.0, r=0.95, num_keys=10, duration=200.0, seed=77)),
                    (0.75, write_heavy)),
        seed=5,
    )
    assert generate(reseeded).fingerprint() == stream.fingerprint(), "mixture seed overrides component seeds"

    print(f"✓ {n_first} + {n_second} events with disjoint keys")


def test_trace_parsing():
    print("\n" + "=" * 60)
    print("TEST: Trace Parsing")
    print("=" * 60)

    path = _write_trace(
        "# timestamp_s,key,op[,key_size,value_size]\n"
        "0.50,user:2,SET,8,512\n"
        "\n"
        "0.10,user:1,GET\n"
        "0.10,user:1,w\n"
        "0.30,user:2,read\n"
    )
    try:
        stream = parse_trace(path)
    finally:
        path.unlink()

    events = list(stream)
    assert [e.key for e in events] == ["user:1", "user:1", "user:2", "user:2"], "sorted stably by time"
    assert [e.op for e in events] == [Op.READ, Op.WRITE, Op.READ, Op.WRITE]
    assert events[3].key_size == 8 and events[3].value_size == 512, "explicit sizes kept"
    assert events[0].key_size == 16 and events[0].value_size == 128, "default sizes"
    assert [e.seq for e in events] == [0, 1, 2, 3]
    assert stream.duration == 0.5

    spec = workload_spec_from_dict({"kind": "trace", "path": "unused.csv"})
    assert isinstance(spec, TraceWorkload) and spec.format == "csv"

    print("✓ Trace read, sorted and typed")


def test_trace_errors():
    print("\n" + "=" * 60)
    print("TEST: Malformed Traces")
    print("=" * 60)

    path = _write_trace(
        "0.1,a,GET\n"
        "0.2,b,FETCH\n"
        "0.3,c\n"
        "oops,d,SET\n"
        "0.5,e,SET,0,10\n"
        "0.6,f,GET\n"
    )
    try:
        parse_trace(path)
    except TraceFormatError as e:
        assert e.line_numbers == [2, 3, 4, 5], f"bad lines {e.line_numbers}"
        assert f"{path}:2" in str(e), f"first bad line named in {e}"
        assert "3 more" in str(e), str(e)
    else:
        raise AssertionError("malformed trace should be rejected")
    finally:
        path.unlink()

    try:
        parse_trace("/nonexistent/trace.csv")
    except WorkloadError as e:
        assert not isinstance(e, TraceFormatError), "missing file is not a format error"
    else:
        raise AssertionError("missing trace should fail")

    try:
        parse_trace("whatever.bin", format="binary")
    except WorkloadError as e:
        assert "unsupported trace format" in str(e)
    else:
        raise AssertionError("unknown format should fail")

    print("✓ Every bad line reported")


def test_key_params():
    print("\n" + "=" * 60)
    print("TEST: Per-Key Parameter Estimates")
    print("=" * 60)

    stream = generate(PoissonWorkload(lam=40.0, r=0.75, num_keys=1, duration=500.0, seed=2))
    lam, r = estimate_key_params(stream, 0)
    assert abs(lam - 40.0) / 40.0 < 0.03, f"lam estimate {lam}"
    assert abs(r - 0.75) < 0.02, f"r estimate {r}"
    assert estimate_all_key_params(stream) == {0: (lam, r)}, "bulk estimate agrees"

    try:
        estimate_key_params(stream, "missing")
    except WorkloadError:
        pass
    else:
        raise AssertionError("unknown key should fail")

    empty = EventStream(times=np.array([]), keys=[], is_write=np.array([], dtype=bool))
    try:
        estimate_all_key_params(empty)
    except WorkloadError:
        pass
    else:
        raise AssertionError("zero duration should fail")

    print(f"✓ lam={lam:.2f} r={r:.3f}")


def test_stream_helpers():
    print("\n" + "=" * 60)
    print("TEST: Event Stream Helpers")
    print("=" * 60)

    stream = generate(PoissonWorkload(lam=30.0, r=0.6, num_keys=5, zipf_s=1.0, duration=50.0, seed=8))
    counts = stream.key_counts()
    assert sum(r + w for r, w in counts.values()) == len(stream)
    assert set(stream.distinct_keys()) == set(counts)

    key = stream.distinct_keys()[0]
    only = stream.events_for(key)
    assert len(only) == sum(counts[key]) and set(only.keys) == {key}
    assert only.duration == stream.duration, "subsets keep the horizon"
    assert len(stream.head(10)) == 10

    rebuilt = EventStream.from_events(list(stream), duration=stream.duration)
    assert rebuilt.fingerprint() == stream.fingerprint(), "events rebuild the same stream"

    print("✓ Counts, subsets and rebuilds consistent")


if __name__ == "__main__":
    test_poisson_stream()
    test_zipf_popularity()
    test_determinism()
    test_parameter_validation()
    test_mixture()
    test_trace_parsing()
    test_trace_errors()
    test_key_params()
    test_stream_helpers()
    print("\n✓ All workload tests passed")
