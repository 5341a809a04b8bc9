"""Decision accuracy and cost benchmarks for estimators."""

import logging
import time
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional

from ..freshmodel import CostParams, decide_from_ew
from ..workload import Event, EventStream
from .base_estimator import Estimator, SketchError
from .exact import ExactEwTracker

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BenchRow:
    estimator: str
    keys: int
    events: int
    agreement: float
    bytes: int
    ns_per_record: float


def replay(estimator: Estimator, events: Iterable[Event]) -> int:
    """Record every event into ``estimator``; returns the event count."""
    count = 0
    record = estimator.record
    for event in events:
        record(event.key, event.op)
        count += 1
    return count


def _agreement(estimator: Estimator, reference: ExactEwTracker, costs: CostParams) -> float:
    eligible = 0
    matches = 0
    for key in reference.keys():
        reads, writes = reference.counts(key)
        if reads == 0 or writes == 0:
            continue
        eligible += 1
        expected = decide_from_ew(reference.estimate_ew(key).value, costs)
        if decide_from_ew(estimator.estimate_ew(key).value, costs) is expected:
            matches += 1
    if eligible == 0:
        raise SketchError("no key has both a read and a write; decision accuracy is undefined")
    return matches / eligible


def decision_accuracy(
    estimator: Estimator,
    events: EventStream,
    costs: CostParams,
    reference: Optional[ExactEwTracker] = None,
) -> float:
    """Fraction of per-key update/invalidate decisions matching exact tracking.

    Both estimators replay ``events``; decisions are compared at the end over
    keys with at least one read and one write.
    """
    if reference is None:
        reference = ExactEwTracker()
    replay(estimator, events)
    if reference is not estimator:
        replay(reference, events)
    return _agreement(estimator, reference, costs)


def benchmark_estimators(
    estimators: Dict[str, Estimator],
    events: EventStream,
    costs: CostParams,
    timing: bool = True,
) -> List[BenchRow]:
    """One row per estimator: agreement with exact tracking, bytes, record cost.

    With ``timing`` off ``ns_per_record`` is reported as 0 so output is
    reproducible byte for byte.
    """
    reference = ExactEwTracker()
    replay(reference, events)
    key_count = len(reference)

    rows = []
    for label, estimator in estimators.items():
        start = time.perf_counter_ns()
        count = replay(estimator, events)
        elapsed = time.perf_counter_ns() - start
        agreement = _agreement(estimator, reference, costs)
        rows.append(
            BenchRow(
                estimator=label,
                keys=key_count,
                events=count,
                agreement=agreement,
                bytes=estimator.memory_footprint(),
                ns_per_record=(elapsed / count if count else 0.0) if timing else 0.0,
            )
        )
        logger.info(
            "%s: agreement=%.4f bytes=%d over %d events",
            label,
            agreement,
            rows[-1].bytes,
            count,
        )
    return rows
