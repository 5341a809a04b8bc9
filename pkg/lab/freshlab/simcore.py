"""Discrete-event simulator of a cache-aside cache and its backend.

Reads go to the cache and fill it on a miss; writes go to the backend, which
collects the keys written during each interval of length T and hands them to
the freshness policy at the next boundary n*T. A boundary is flushed before
any event stamped at or after it.

READ CLASSIFICATION:
- hit:        resident, valid, not expired (no cost)
- stale miss: resident but invalid or expired (C_S += 1, C_F += c_miss)
- cold miss:  not resident (C_F += c_miss, not part of C_S)

A cached copy's ``version_time`` is the instant of backend state it reflects.
A read served at s violates the staleness bound iff the backend took a write
w with version_time < w <= s - T.
"""

import bisect
import logging
import math
from collections import OrderedDict
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Hashable, Iterable, List, Optional, Tuple, Union

from .errors import LabError, ParameterError
from .freshmodel import CostParams, interval_index
from .policies import BasePolicy, PolicyAction, PolicyContext, TtlMode, make_policy
from .sketch import make_estimator
from .workload import Event, EventStream, Op

logger = logging.getLogger(__name__)

TTL_ALIGNMENTS = ("fetch", "interval")


class SimulationError(LabError):
    """Simulation input is inconsistent (e.g. events out of order)."""
    pass


class MetricsError(LabError):
    """A normalized metric has an empty denominator."""
    pass


class RecordKind(Enum):
    HIT = "HIT"
    STALE_MISS = "STALE_MISS"
    COLD_MISS = "COLD_MISS"
    UPDATE_SENT = "UPDATE_SENT"
    INVALIDATE_SENT = "INVALIDATE_SENT"
    TTL_POLL = "TTL_POLL"
    TTL_EXPIRE = "TTL_EXPIRE"
    EVICT = "EVICT"


SERVED_KINDS = frozenset({RecordKind.HIT, RecordKind.STALE_MISS, RecordKind.COLD_MISS})


@dataclass
class SimConfig:
    """One simulation run.

    Args:
        staleness_bound: T in seconds
        costs: message costs
        policy: descriptor string or policy instance
        cache_capacity: maximum resident entries
        seed: seed for estimator hashing
        horizon: end of the run; defaults to the stream duration
        warmup_events: metrics before this event index are discarded
        ttl_alignment: ``fetch`` (deadline = fetch + T) or ``interval``
            (deadline = next boundary after fetch)
        invalidation_tracking_limit: FIFO bound on the backend's
            invalidated-key set, unbounded when None
        estimator: estimator descriptor for policies that need one
    """

    staleness_bound: float
    costs: CostParams
    policy: Union[str, BasePolicy] = "invalidate"
    cache_capacity: int = 1000
    seed: int = 0
    horizon: Optional[float] = None
    warmup_events: int = 0
    ttl_alignment: str = "fetch"
    invalidation_tracking_limit: Optional[int] = None
    estimator: Optional[str] = "exact"
    record_transcript: bool = False
    track_per_key: bool = False

    def __post_init__(self):
        if not (self.staleness_bound > 0 and math.isfinite(self.staleness_bound)):
            raise ParameterError(f"staleness_bound must be positive, got {self.staleness_bound}")
        if self.cache_capacity < 1:
            raise ParameterError(f"cache_capacity must be >= 1, got {self.cache_capacity}")
        if self.horizon is not None and self.horizon < 0:
            raise ParameterError(f"horizon must be >= 0, got {self.horizon}")
        if self.warmup_events < 0:
            raise ParameterError(f"warmup_events must be >= 0, got {self.warmup_events}")
        if self.ttl_alignment not in TTL_ALIGNMENTS:
            raise ParameterError(
                f"ttl_alignment must be one of {', '.join(TTL_ALIGNMENTS)}, got {self.ttl_alignment!r}"
            )
        if self.invalidation_tracking_limit is not None and self.invalidation_tracking_limit < 1:
            raise ParameterError("invalidation_tracking_limit must be >= 1 when set")


@dataclass(slots=True)
class CacheEntry:
    key: Hashable
    version_time: float
    fetched_at: float
    valid: bool = True
    ttl_deadline: Optional[float] = None
    lru_stamp: int = 0


class BackendState:
    """Per-key write clock, dirty set and invalidated set.

    Both sets keep insertion order so flushes are reproducible.
    """

    def __init__(self, tracking_limit: Optional[int] = None):
        self.version: Dict[Hashable, float] = {}
        self.dirty: Dict[Hashable, None] = {}
        self.invalidated: "OrderedDict[Hashable, None]" = OrderedDict()
        self.tracking_limit = tracking_limit
        self.forgotten = 0

    def write(self, key: Hashable, time: float) -> None:
        self.version[key] = time
        self.dirty[key] = None

    def take_dirty(self) -> List[Hashable]:
        keys = list(self.dirty)
        self.dirty.clear()
        return keys

    def mark_invalidated(self, key: Hashable) -> None:
        self.invalidated[key] = None
        if self.tracking_limit is not None and len(self.invalidated) > self.tracking_limit:
            self.invalidated.popitem(last=False)
            self.forgotten += 1

    def clear_invalidated(self, key: Hashable) -> None:
        self.invalidated.pop(key, None)


@dataclass
class KeyMetrics:
    reads: int = 0
    writes: int = 0
    hits: int = 0
    stale_misses: int = 0
    cold_misses: int = 0
    updates: int = 0
    invalidates: int = 0
    polls: int = 0
    freshness_cost: float = 0.0


@dataclass
class FreshnessMetrics:
    freshness_cost: float = 0.0
    stale_misses: int = 0
    cold_or_capacity_misses: int = 0
    reads_total: int = 0
    reads_with_resident_object: int = 0
    writes_total: int = 0
    hits: int = 0
    updates_sent: int = 0
    invalidates_sent: int = 0
    polls: int = 0
    expirations: int = 0
    evictions: int = 0
    boundaries: int = 0
    invalidated_at_boundary: int = 0
    per_key: Dict[Hashable, KeyMetrics] = field(default_factory=dict)

    @property
    def invalidated_fraction(self) -> float:
        """Mean number of invalidated keys per boundary."""
        if self.boundaries == 0:
            raise MetricsError("no interval boundary was crossed")
        return self.invalidated_at_boundary / self.boundaries

    def key(self, key: Hashable) -> KeyMetrics:
        entry = self.per_key.get(key)
        if entry is None:
            entry = self.per_key[key] = KeyMetrics()
        return entry

    def summary(self) -> Dict[str, Any]:
        data = asdict(self)
        data.pop("per_key")
        return data


Record = Tuple[int, float, Hashable, RecordKind, Any]


class Transcript:
    """Run transcript: one record per cache-side event plus per-key write times.

    Records are ``(event_seq, time, key, kind, detail)``. Boundary records
    carry the seq of the event that triggered the flush, -1 at end of run.
    Served reads carry the version_time they returned.
    """

    def __init__(self):
        self.records: List[Record] = []
        self.writes: Dict[Hashable, List[float]] = {}

    def add(self, seq: int, time: float, key: Hashable, kind: RecordKind, detail: Any = "") -> None:
        self.records.append((seq, time, key, kind, detail))

    def add_write(self, key: Hashable, time: float) -> None:
        self.writes.setdefault(key, []).append(time)

    def of_kind(self, kind: RecordKind) -> List[Record]:
        return [rec for rec in self.records if rec[3] is kind]

    def count(self, kind: RecordKind) -> int:
        return sum(1 for rec in self.records if rec[3] is kind)

    def lines(self) -> List[str]:
        def fmt(value: Any) -> str:
            return repr(value) if isinstance(value, float) else str(value)

        return [
            f"{seq},{fmt(time)},{key},{kind.value},{fmt(detail)}"
            for seq, time, key, kind, detail in self.records
        ]

    def write(self, path: Union[str, Path]) -> None:
        Path(path).write_text("\n".join(self.lines()) + ("\n" if self.records else ""), encoding="utf-8")


@dataclass(frozen=True)
class StalenessViolation:
    seq: int
    key: Hashable
    serve_time: float
    version_time: float
    write_time: float


def audit_staleness(transcript: Transcript, staleness_bound: float, eps: float = 1e-9) -> List[StalenessViolation]:
    """Every served read whose copy missed a write older than T."""
    violations = []
    for seq, time, key, kind, version_time in transcript.records:
        if kind not in SERVED_KINDS:
            continue
        writes = transcript.writes.get(key)
        if not writes:
            continue
        idx = bisect.bisect_right(writes, version_time)
        if idx < len(writes):
            tolerance = eps * max(1.0, abs(time))
            if writes[idx] <= time - staleness_bound - tolerance:
                violations.append(StalenessViolation(seq, key, time, version_time, writes[idx]))
    return violations


def normalize(metrics: FreshnessMetrics, costs: CostParams) -> Tuple[float, float]:
    """(C_F', C_S'): C_F over reads_total*c_serve, C_S over reads_with_resident_object."""
    if metrics.reads_total == 0:
        raise MetricsError("C_F' undefined: reads_total is zero")
    if costs.c_serve == 0:
        raise MetricsError("C_F' undefined: c_serve is zero")
    if metrics.reads_with_resident_object == 0:
        raise MetricsError("C_S' undefined: reads_with_resident_object is zero")
    return (
        metrics.freshness_cost / (metrics.reads_total * costs.c_serve),
        metrics.stale_misses / metrics.reads_with_resident_object,
    )


class CacheSimulator:
    """Single sequential run of one policy over one event stream."""

    def __init__(self, config: SimConfig):
        self.config = config
        self.costs = config.costs
        self.T = config.staleness_bound
        self.policy = make_policy(config.policy)
        self.ttl_mode = self.policy.ttl_mode
        self.cache: "OrderedDict[Hashable, CacheEntry]" = OrderedDict()
        self.backend = BackendState(config.invalidation_tracking_limit)
        self.metrics = FreshnessMetrics()
        self.transcript: Optional[Transcript] = Transcript() if config.record_transcript else None
        self._lru_clock = 0
        self._current_boundary = 0

        estimator = None
        if self.policy.uses_estimator and config.estimator:
            estimator = make_estimator(config.estimator, seed=config.seed)
        self.estimator = estimator
        self.ctx = PolicyContext(
            costs=self.costs,
            staleness_bound=self.T,
            estimator=estimator,
            is_resident=self.is_resident if self.policy.uses_residency else None,
            invalidated=self.backend.invalidated.keys(),
        )

    def is_resident(self, key: Hashable) -> bool:
        return key in self.cache

    def _record(self, seq: int, time: float, key: Hashable, kind: RecordKind, detail: Any = "") -> None:
        if self.transcript is not None:
            self.transcript.add(seq, time, key, kind, detail)

    def _key_metrics(self, key: Hashable) -> Optional[KeyMetrics]:
        return self.metrics.key(key) if self.config.track_per_key else None

    def _charge(self, cost: float, km: Optional[KeyMetrics]) -> None:
        self.metrics.freshness_cost += cost
        if km is not None:
            km.freshness_cost += cost

    def _deadline(self, fetched_at: float) -> Optional[float]:
        if self.ttl_mode is None:
            return None
        if self.config.ttl_alignment == "interval":
            return (interval_index(fetched_at, self.T) + 1) * self.T
        return fetched_at + self.T

    def _catch_up_polls(self, entry: CacheEntry, now: float, seq: int) -> None:
        """Charge every poll due at or before ``now``."""
        deadline = entry.ttl_deadline
        if deadline is None:
            return
        polls = interval_index(now - deadline, self.T) + 1
        if polls <= 0:
            return
        if self.config.ttl_alignment == "interval":
            first = round(deadline / self.T)
            last_poll = (first + polls - 1) * self.T
            entry.ttl_deadline = (first + polls) * self.T
        else:
            last_poll = deadline + (polls - 1) * self.T
            entry.ttl_deadline = deadline + polls * self.T
        entry.version_time = last_poll
        km = self._key_metrics(entry.key)
        self._charge(polls * self.costs.c_miss, km)
        self.metrics.polls += polls
        if km is not None:
            km.polls += polls
        self._record(seq, last_poll, entry.key, RecordKind.TTL_POLL, polls)

    def _flush(self, boundary: int, seq: int) -> None:
        dirty = self.backend.take_dirty()
        if dirty or self.policy.uses_future:
            self.ctx.boundary_index = boundary
            actions = self.policy.decide_batch(dirty, self.ctx)
            now = boundary * self.T
            sent = 0
            for key, action in actions.items():
                if action is PolicyAction.SEND_UPDATE:
                    self._apply_update(key, now, seq)
                    sent += 1
                elif action is PolicyAction.SEND_INVALIDATE:
                    sent += self._apply_invalidate(key, now, seq)
            if sent and logger.isEnabledFor(logging.DEBUG):
                logger.debug("boundary %d: %d dirty, %d messages", boundary, len(dirty), sent)
        self.metrics.boundaries += 1
        self.metrics.invalidated_at_boundary += len(self.backend.invalidated)

    def _count_idle(self, count: int) -> None:
        if count > 0:
            self.metrics.boundaries += count
            self.metrics.invalidated_at_boundary += count * len(self.backend.invalidated)

    def _apply_update(self, key: Hashable, now: float, seq: int) -> None:
        km = self._key_metrics(key)
        self._charge(self.costs.c_update, km)
        self.metrics.updates_sent += 1
        if km is not None:
            km.updates += 1
        entry = self.cache.get(key)
        if entry is not None:
            if self.ttl_mode is TtlMode.POLLING:
                self._catch_up_polls(entry, now, seq)
            entry.version_time = now
            entry.valid = True
            self.backend.clear_invalidated(key)
        self._record(seq, now, key, RecordKind.UPDATE_SENT, now)

    def _apply_invalidate(self, key: Hashable, now: float, seq: int) -> int:
        if key in self.backend.invalidated:
            return 0
        km = self._key_metrics(key)
        self._charge(self.costs.c_invalidate, km)
        self.metrics.invalidates_sent += 1
        if km is not None:
            km.invalidates += 1
        entry = self.cache.get(key)
        if entry is not None:
            entry.valid = False
        self.backend.mark_invalidated(key)
        self._record(seq, now, key, RecordKind.INVALIDATE_SENT)
        return 1

    def _advance(self, target: int, seq: int) -> None:
        """Process boundaries current+1 .. target."""
        boundary = self._current_boundary + 1
        if boundary > target:
            return
        self._flush(boundary, seq)
        previous = boundary
        while True:
            scheduled = self.policy.next_boundary(previous)
            if scheduled is None or scheduled > target:
                break
            self._count_idle(scheduled - previous - 1)
            self._flush(scheduled, seq)
            previous = scheduled
        self._count_idle(target - previous)
        self._current_boundary = target

    def _read(self, event: Event) -> None:
        key, now, seq = event.key, event.time, event.seq
        m = self.metrics
        km = self._key_metrics(key)
        m.reads_total += 1
        if km is not None:
            km.reads += 1
        self._lru_clock += 1

        entry = self.cache.get(key)
        if entry is not None:
            if self.ttl_mode is TtlMode.POLLING:
                self._catch_up_polls(entry, now, seq)
            self.cache.move_to_end(key)
            entry.lru_stamp = self._lru_clock
            m.reads_with_resident_object += 1
            expired = (
                self.ttl_mode is TtlMode.EXPIRY
                and entry.ttl_deadline is not None
                and interval_index(now - entry.ttl_deadline, self.T) >= 0
            )
            if entry.valid and not expired:
                m.hits += 1
                if km is not None:
                    km.hits += 1
                self._record(seq, now, key, RecordKind.HIT, entry.version_time)
                return
            if expired:
                m.expirations += 1
                self._record(seq, now, key, RecordKind.TTL_EXPIRE, entry.ttl_deadline)
            m.stale_misses += 1
            if km is not None:
                km.stale_misses += 1
            self._charge(self.costs.c_miss, km)
            entry.version_time = now
            entry.fetched_at = now
            entry.valid = True
            entry.ttl_deadline = self._deadline(now)
            self.backend.clear_invalidated(key)
            self._record(seq, now, key, RecordKind.STALE_MISS, now)
            return

        m.cold_or_capacity_misses += 1
        if km is not None:
            km.cold_misses += 1
        self._charge(self.costs.c_miss, km)
        if len(self.cache) >= self.config.cache_capacity:
            victim_key, victim = self.cache.popitem(last=False)
            if self.ttl_mode is TtlMode.POLLING:
                self._catch_up_polls(victim, now, seq)
            m.evictions += 1
            self._record(seq, now, victim_key, RecordKind.EVICT)
        self.cache[key] = CacheEntry(
            key=key,
            version_time=now,
            fetched_at=now,
            valid=True,
            ttl_deadline=self._deadline(now),
            lru_stamp=self._lru_clock,
        )
        self.backend.clear_invalidated(key)
        self._record(seq, now, key, RecordKind.COLD_MISS, now)

    def _write(self, event: Event) -> None:
        self.metrics.writes_total += 1
        km = self._key_metrics(event.key)
        if km is not None:
            km.writes += 1
        self.backend.write(event.key, event.time)
        if self.transcript is not None:
            self.transcript.add_write(event.key, event.time)

    def run(self, events: Iterable[Event]) -> FreshnessMetrics:
        if not isinstance(events, EventStream):
            events = list(events)
        if self.config.horizon is not None:
            horizon = self.config.horizon
        elif isinstance(events, EventStream):
            horizon = events.duration
        else:
            horizon = events[-1].time if events else 0.0

        if self.policy.uses_future:
            self.ctx.future = events
        self.policy.prepare(self.ctx)

        warmup = self.config.warmup_events
        estimator = self.estimator
        prev_time, prev_seq = -math.inf, -1
        count = 0
        for index, event in enumerate(events):
            if event.time < prev_time or (event.time == prev_time and event.seq < prev_seq):
                raise SimulationError(
                    f"events out of order at seq {event.seq}: t={event.time} after t={prev_time}"
                )
            prev_time, prev_seq = event.time, event.seq
            if warmup and index == warmup:
                self.metrics = FreshnessMetrics()

            n = interval_index(event.time, self.T)
            if n > self._current_boundary:
                self._advance(n, event.seq)
            if estimator is not None:
                estimator.record(event.key, event.op)
            if event.op is Op.WRITE:
                self._write(event)
            else:
                self._read(event)
            count += 1

        final_boundary = interval_index(horizon, self.T)
        if final_boundary > self._current_boundary:
            self._advance(final_boundary, -1)
        if self.ttl_mode is TtlMode.POLLING:
            for entry in list(self.cache.values()):
                self._catch_up_polls(entry, horizon, -1)

        logger.debug(
            "run %s T=%g: %d events, C_F=%.6g C_S=%d",
            self.policy.label,
            self.T,
            count,
            self.metrics.freshness_cost,
            self.metrics.stale_misses,
        )
        return self.metrics


def run(events: Iterable[Event], config: SimConfig) -> FreshnessMetrics:
    """Simulate ``events`` under ``config`` and return the metrics."""
    return CacheSimulator(config).run(events)


def run_with_transcript(events: Iterable[Event], config: SimConfig) -> Tuple[FreshnessMetrics, Transcript]:
    sim = CacheSimulator(config if config.record_transcript else replace(config, record_transcript=True))
    metrics = sim.run(events)
    return metrics, sim.transcript
