"""Workload generation and trace ingestion.

Synthetic workloads are Poisson request streams with Bernoulli read/write
labels and Zipf key popularity. Mixtures merge several component streams by
time. Traces are CSV files replayed into the same event format.

TRACE FORMAT (UTF-8, one record per line):
    timestamp_s,key,op[,key_size,value_size]

``#`` lines are comments. ``op`` accepts R, W, READ, WRITE, GET, SET,
UPDATE and DELETE (case-insensitive).
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Hashable, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import LabError, ParameterError

logger = logging.getLogger(__name__)

DEFAULT_KEY_SIZE = 16
DEFAULT_VALUE_SIZE = 128

OP_ALIASES = {
    "R": False,
    "READ": False,
    "GET": False,
    "W": True,
    "WRITE": True,
    "SET": True,
    "UPDATE": True,
    "DELETE": True,
}


class WorkloadError(LabError):
    """Workload could not be generated, read, or queried."""
    pass


class TraceFormatError(WorkloadError):
    """Trace file holds malformed records."""

    def __init__(self, message: str, line_numbers: Sequence[int] = ()):
        super().__init__(message)
        self.line_numbers = list(line_numbers)


class Op(Enum):
    READ = "R"
    WRITE = "W"


@dataclass(frozen=True, slots=True)
class Event:
    time: float
    key: Hashable
    op: Op
    key_size: int = DEFAULT_KEY_SIZE
    value_size: int = DEFAULT_VALUE_SIZE
    seq: int = 0

    @property
    def is_write(self) -> bool:
        return self.op is Op.WRITE


class EventStream:
    """Columnar event stream ordered by (time, seq).

    Times and sizes are numpy arrays, keys a plain list. ``seq`` is the
    position in the stream. Iterating yields Event objects.
    """

    def __init__(
        self,
        times: np.ndarray,
        keys: List[Hashable],
        is_write: np.ndarray,
        key_sizes: Optional[np.ndarray] = None,
        value_sizes: Optional[np.ndarray] = None,
        duration: Optional[float] = None,
    ):
        n = len(keys)
        self.times = np.asarray(times, dtype=np.float64)
        self.keys = list(keys)
        self.is_write = np.asarray(is_write, dtype=bool)
        self.key_sizes = (
            np.full(n, DEFAULT_KEY_SIZE, dtype=np.int64)
            if key_sizes is None
            else np.asarray(key_sizes, dtype=np.int64)
        )
        self.value_sizes = (
            np.full(n, DEFAULT_VALUE_SIZE, dtype=np.int64)
            if value_sizes is None
            else np.asarray(value_sizes, dtype=np.int64)
        )
        if not (len(self.times) == len(self.is_write) == len(self.key_sizes) == len(self.value_sizes) == n):
            raise WorkloadError("event stream columns have different lengths")
        if duration is None:
            duration = float(self.times[-1]) if n else 0.0
        self.duration = float(duration)

    @classmethod
    def from_events(cls, events: Iterable[Event], duration: Optional[float] = None) -> "EventStream":
        events = list(events)
        return cls(
            times=np.array([e.time for e in events], dtype=np.float64),
            keys=[e.key for e in events],
            is_write=np.array([e.op is Op.WRITE for e in events], dtype=bool),
            key_sizes=np.array([e.key_size for e in events], dtype=np.int64),
            value_sizes=np.array([e.value_size for e in events], dtype=np.int64),
            duration=duration,
        )

    def __len__(self) -> int:
        return len(self.keys)

    def __iter__(self) -> Iterator[Event]:
        times = self.times.tolist()
        writes = self.is_write.tolist()
        key_sizes = self.key_sizes.tolist()
        value_sizes = self.value_sizes.tolist()
        for seq, key in enumerate(self.keys):
            yield Event(
                time=times[seq],
                key=key,
                op=Op.WRITE if writes[seq] else Op.READ,
                key_size=key_sizes[seq],
                value_size=value_sizes[seq],
                seq=seq,
            )

    def distinct_keys(self) -> List[Hashable]:
        """Keys in order of first appearance."""
        return list(dict.fromkeys(self.keys))

    def key_counts(self) -> Dict[Hashable, Tuple[int, int]]:
        """Map key -> (reads, writes)."""
        counts: Dict[Hashable, List[int]] = {}
        for key, write in zip(self.keys, self.is_write.tolist()):
            entry = counts.get(key)
            if entry is None:
                entry = counts[key] = [0, 0]
            entry[1 if write else 0] += 1
        return {key: (reads, writes) for key, (reads, writes) in counts.items()}

    def events_for(self, key: Hashable) -> "EventStream":
        idx = np.array([i for i, k in enumerate(self.keys) if k == key], dtype=np.int64)
        return self._take(idx)

    def head(self, count: int) -> "EventStream":
        return self._take(np.arange(min(count, len(self)), dtype=np.int64))

    def _take(self, idx: np.ndarray) -> "EventStream":
        return EventStream(
            times=self.times[idx],
            keys=[self.keys[i] for i in idx.tolist()],
            is_write=self.is_write[idx],
            key_sizes=self.key_sizes[idx],
            value_sizes=self.value_sizes[idx],
            duration=self.duration,
        )

    def fingerprint(self) -> bytes:
        """Byte image of the stream, equal for equal streams."""
        parts = [
            self.times.tobytes(),
            self.is_write.tobytes(),
            self.key_sizes.tobytes(),
            self.value_sizes.tobytes(),
            "\x1f".join(repr(k) for k in self.keys).encode("utf-8"),
        ]
        return b"\x1e".join(parts)


@dataclass(frozen=True)
class PoissonWorkload:
    lam: float = 10.0
    r: float = 0.9
    num_keys: int = 1000
    zipf_s: float = 1.3
    duration: float = 1000.0
    seed: int = 0
    key_size: int = DEFAULT_KEY_SIZE
    value_size: int = DEFAULT_VALUE_SIZE

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ParameterError(f"workload lam must be positive, got {self.lam}")
        if not 0.0 <= self.r <= 1.0:
            raise ParameterError(f"workload r must lie in [0, 1], got {self.r}")
        if self.num_keys < 1:
            raise ParameterError(f"num_keys must be >= 1, got {self.num_keys}")
        if not self.zipf_s > 0:
            raise ParameterError(f"zipf_s must be > 0, got {self.zipf_s}")
        if not (self.duration > 0 and math.isfinite(self.duration)):
            raise ParameterError(f"duration must be positive, got {self.duration}")
        if self.key_size <= 0 or self.value_size < 0:
            raise ParameterError("key_size must be > 0 and value_size >= 0")


@dataclass(frozen=True)
class TraceWorkload:
    path: str
    format: str = "csv"


@dataclass(frozen=True)
class MixtureWorkload:
    """Weighted merge of component workloads.

    Weights scale component request rates. Poisson components get disjoint
    key ranges; trace components are thinned by their weight and their keys
    prefixed with ``c<i>/``.
    """

    components: Tuple[Tuple[float, Any], ...] = field(default_factory=tuple)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "components", tuple((float(w), s) for w, s in self.components))
        if not self.components:
            raise ParameterError("mixture needs at least one component")
        for weight, spec in self.components:
            if not weight > 0:
                raise ParameterError(f"mixture weights must be positive, got {weight}")
            if isinstance(spec, MixtureWorkload):
                raise ParameterError("nested mixtures are not supported")
        total = sum(w for w, _ in self.components)
        if abs(total - 1.0) > 1e-9:
            raise ParameterError(f"mixture weights must sum to 1, got {total}")


WorkloadSpec = Union[PoissonWorkload, MixtureWorkload, TraceWorkload]


def zipf_probabilities(num_keys: int, s: float) -> np.ndarray:
    """Normalized Zipf(s) mass over ranks 1..num_keys (index 0 is rank 1)."""
    weights = np.arange(1, num_keys + 1, dtype=np.float64) ** -s
    return weights / weights.sum()


def _zipf_ranks(rng: np.random.Generator, num_keys: int, s: float, count: int) -> np.ndarray:
    cdf = np.cumsum(zipf_probabilities(num_keys, s))
    ranks = np.searchsorted(cdf, rng.random(count), side="right")
    return np.minimum(ranks, num_keys - 1)


def _poisson_times(rng: np.random.Generator, lam: float, duration: float) -> np.ndarray:
    expected = lam * duration
    chunk = int(expected + 6.0 * math.sqrt(expected) + 16)
    pieces = []
    start = 0.0
    while True:
        times = start + np.cumsum(rng.exponential(1.0 / lam, chunk))
        if times[-1] >= duration:
            pieces.append(times[times < duration])
            break
        pieces.append(times)
        start = float(times[-1])
    return np.concatenate(pieces)


def _generate_poisson(spec: PoissonWorkload, key_offset: int = 0) -> EventStream:
    rng = np.random.default_rng(spec.seed)
    times = _poisson_times(rng, spec.lam, spec.duration)
    count = len(times)
    is_write = rng.random(count) >= spec.r
    ranks = _zipf_ranks(rng, spec.num_keys, spec.zipf_s, count)
    if key_offset:
        ranks = ranks + key_offset
    return EventStream(
        times=times,
        keys=ranks.tolist(),
        is_write=is_write,
        key_sizes=np.full(count, spec.key_size, dtype=np.int64),
        value_sizes=np.full(count, spec.value_size, dtype=np.int64),
        duration=spec.duration,
    )


def _component_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1, dtype=np.uint64)[0])


def _generate_mixture(spec: MixtureWorkload) -> EventStream:
    streams: List[EventStream] = []
    key_offset = 0
    for index, (weight, component) in enumerate(spec.components):
        child_seed = _component_seed(spec.seed, index)
        if isinstance(component, PoissonWorkload):
            scaled = PoissonWorkload(
                lam=component.lam * weight,
                r=component.r,
                num_keys=component.num_keys,
                zipf_s=component.zipf_s,
                duration=component.duration,
                seed=child_seed,
                key_size=component.key_size,
                value_size=component.value_size,
            )
            streams.append(_generate_poisson(scaled, key_offset))
            key_offset += component.num_keys
        elif isinstance(component, TraceWorkload):
            trace = parse_trace(component.path, component.format)
            keep = np.random.default_rng(child_seed).random(len(trace)) < weight
            idx = np.flatnonzero(keep)
            thinned = trace._take(idx)
            thinned.keys = [f"c{index}/{k}" for k in thinned.keys]
            streams.append(thinned)
        else:
            raise WorkloadError(f"unsupported mixture component {component!r}")

    times = np.concatenate([s.times for s in streams])
    order = np.argsort(times, kind="stable")
    keys: List[Hashable] = []
    for s in streams:
        keys.extend(s.keys)
    return EventStream(
        times=times[order],
        keys=[keys[i] for i in order.tolist()],
        is_write=np.concatenate([s.is_write for s in streams])[order],
        key_sizes=np.concatenate([s.key_sizes for s in streams])[order],
        value_sizes=np.concatenate([s.value_sizes for s in streams])[order],
        duration=max(s.duration for s in streams),
    )


def generate(spec: WorkloadSpec) -> EventStream:
    """Generate the event stream for ``spec``; deterministic given its seed."""
    if isinstance(spec, PoissonWorkload):
        stream = _generate_poisson(spec)
    elif isinstance(spec, MixtureWorkload):
        stream = _generate_mixture(spec)
    elif isinstance(spec, TraceWorkload):
        stream = parse_trace(spec.path, spec.format)
    else:
        raise WorkloadError(f"unsupported workload spec {spec!r}")
    logger.debug("generated %d events over %.6gs", len(stream), stream.duration)
    return stream


def _parse_record(fields: List[str]) -> Tuple[float, str, bool, int, int]:
    if len(fields) not in (3, 5):
        raise ValueError(f"expected 3 or 5 fields, got {len(fields)}")
    try:
        time = float(fields[0])
    except ValueError:
        raise ValueError(f"bad timestamp {fields[0]!r}") from None
    if not math.isfinite(time) or time < 0:
        raise ValueError(f"timestamp must be finite and >= 0, got {fields[0]!r}")
    key = fields[1].strip()
    if not key:
        raise ValueError("empty key")
    op = fields[2].strip().upper()
    if op not in OP_ALIASES:
        raise ValueError(f"unknown op {fields[2]!r}")
    key_size, value_size = DEFAULT_KEY_SIZE, DEFAULT_VALUE_SIZE
    if len(fields) == 5:
        try:
            key_size, value_size = int(fields[3]), int(fields[4])
        except ValueError:
            raise ValueError("sizes must be integers") from None
        if key_size <= 0 or value_size < 0:
            raise ValueError("key_size must be > 0 and value_size >= 0")
    return time, key, OP_ALIASES[op], key_size, value_size


def parse_trace(path: Union[str, Path], format: str = "csv") -> EventStream:
    """Read a trace file into an event stream sorted stably by timestamp.

    Raises:
        WorkloadError: unreadable file or unsupported format
        TraceFormatError: malformed records; the message names the first one
            and ``line_numbers`` lists all of them
    """
    if format != "csv":
        raise WorkloadError(f"unsupported trace format {format!r}")
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeDecodeError) as e:
        raise WorkloadError(f"cannot read trace {path}: {e}") from e

    records = []
    bad_lines: List[int] = []
    first_error = None
    for line_number, line in enumerate(lines, 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            records.append(_parse_record(next(csv.reader([stripped]))))
        except ValueError as e:
            bad_lines.append(line_number)
            if first_error is None:
                first_error = f"{path}:{line_number}: {e}"
    if bad_lines:
        more = f" ({len(bad_lines) - 1} more)" if len(bad_lines) > 1 else ""
        raise TraceFormatError(f"malformed trace record at {first_error}{more}", bad_lines)

    times = np.array([rec[0] for rec in records], dtype=np.float64)
    order = np.argsort(times, kind="stable")
    ordered = [records[i] for i in order.tolist()]
    logger.info("loaded %d trace records from %s", len(ordered), path)
    return EventStream(
        times=times[order],
        keys=[rec[1] for rec in ordered],
        is_write=np.array([rec[2] for rec in ordered], dtype=bool),
        key_sizes=np.array([rec[3] for rec in ordered], dtype=np.int64),
        value_sizes=np.array([rec[4] for rec in ordered], dtype=np.int64),
    )


def estimate_key_params(
    stream: EventStream,
    key: Hashable,
    duration: Optional[float] = None,
) -> Tuple[float, float]:
    """Empirical (lam, r) of one key: count/duration and reads/count."""
    writes = [w for k, w in zip(stream.keys, stream.is_write.tolist()) if k == key]
    if not writes:
        raise WorkloadError(f"no events for key {key!r}")
    duration = stream.duration if duration is None else duration
    if not duration > 0:
        raise WorkloadError("cannot estimate a rate over a zero duration")
    count = len(writes)
    reads = count - sum(writes)
    return count / duration, reads / count


def estimate_all_key_params(
    stream: EventStream,
    duration: Optional[float] = None,
) -> Dict[Hashable, Tuple[float, float]]:
    """``estimate_key_params`` for every key in one pass."""
    duration = stream.duration if duration is None else duration
    if not duration > 0:
        raise WorkloadError("cannot estimate a rate over a zero duration")
    return {
        key: ((reads + writes) / duration, reads / (reads + writes))
        for key, (reads, writes) in stream.key_counts().items()
    }


def workload_spec_from_dict(values: Dict[str, Any]) -> WorkloadSpec:
    """Build a WorkloadSpec from a plain dict (as assembled from config).

    ``kind`` selects poisson (default), mixture or trace. Mixture components
    are dicts with a ``weight`` entry plus their own fields.
    """
    values = dict(values)
    kind = values.pop("kind", "poisson")
    if kind == "poisson":
        known = {k: v for k, v in values.items() if k in PoissonWorkload.__dataclass_fields__}
        return PoissonWorkload(**known)
    if kind == "trace":
        if "path" not in values:
            raise ParameterError("trace workload needs a path")
        return TraceWorkload(path=str(values["path"]), format=values.get("format", "csv"))
    if kind == "mixture":
        components = []
        for component in values.get("components", []):
            component = dict(component)
            weight = component.pop("weight", None)
            if weight is None:
                raise ParameterError("mixture component needs a weight")
            if component.get("kind") == "mixture":
                raise ParameterError("nested mixtures are not supported")
            components.append((weight, workload_spec_from_dict(component)))
        return MixtureWorkload(components=tuple(components), seed=int(values.get("seed", 0)))
    raise ParameterError(f"unknown workload kind {kind!r}")
