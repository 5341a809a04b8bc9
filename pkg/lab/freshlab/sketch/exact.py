"""Exact per-key E[W] tracking with three counters per key.

- C1: sum of E[W] samples
- C2: number of samples
- C3: consecutive writes since the last read

A write bumps C3. A read after at least one write closes a sample
(C1 += C3, C2 += 1, C3 = 0); a read after a read closes nothing.
"""

from typing import Dict, Hashable, List, Tuple

from ..workload import Op
from .base_estimator import EstimateSource, Estimator, EwEstimate

# key slot + C1, C2, C3, reads, writes
ENTRY_BYTES = 16 + 5 * 8


class ExactEwTracker(Estimator):
    name = "exact"

    def __init__(self):
        # key -> [C1, C2, C3, reads, writes]
        self._entries: Dict[Hashable, List[int]] = {}

    def __len__(self) -> int:
        return len(self._entries)

    def record(self, key: Hashable, op: Op) -> None:
        entry = self._entries.get(key)
        if entry is None:
            entry = self._entries[key] = [0, 0, 0, 0, 0]
        if op is Op.WRITE:
            entry[2] += 1
            entry[4] += 1
        else:
            if entry[2] > 0:
                entry[0] += entry[2]
                entry[1] += 1
                entry[2] = 0
            entry[3] += 1

    def counters(self, key: Hashable) -> Tuple[int, int, int]:
        """(C1, C2, C3) for ``key``."""
        entry = self._entries.get(key)
        if entry is None:
            return 0, 0, 0
        return entry[0], entry[1], entry[2]

    def counts(self, key: Hashable) -> Tuple[int, int]:
        entry = self._entries.get(key)
        if entry is None:
            return 0, 0
        return entry[3], entry[4]

    def keys(self):
        return self._entries.keys()

    def source_for(self, key: Hashable) -> EstimateSource:
        return EstimateSource.EXACT

    def estimate_ew(self, key: Hashable) -> EwEstimate:
        c1, c2, _ = self.counters(key)
        reads, writes = self.counts(key)
        return EwEstimate(
            value=writes / max(reads, 1),
            source=EstimateSource.EXACT,
            support=reads + writes,
            reads=reads,
            writes=writes,
            sample_mean=c1 / c2 if c2 else None,
        )

    def memory_footprint(self) -> int:
        return ENTRY_BYTES * len(self._entries)
