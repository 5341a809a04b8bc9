"""Top-K sketch: exact counters for hot keys, count-min for the rest.

New keys enter the exact table directly while it has room. Once it is full,
cold keys are counted in the count-min tier and promoted when their
estimated total exceeds the smallest exact total. The demoted key's exact
counts are folded back into the count-min tier; the promoted key is seeded
from its count-min estimate. Both steps only ever overcount.
"""

import heapq
import itertools
import logging
from typing import Dict, Hashable, List, Tuple

from ..errors import ParameterError
from ..workload import Op
from .base_estimator import EstimateSource, Estimator
from .countmin import CountMinEstimator

logger = logging.getLogger(__name__)

# key slot + reads + writes + heap slot
ENTRY_BYTES = 16 + 3 * 8


class TopKEstimator(Estimator):
    name = "topk"
    options = {
        "k": ("k", int),
        "d": ("depth", int),
        "w": ("width", int),
    }

    def __init__(self, k: int = 1000, depth: int = 4, width: int = 4096, seed: int = 0):
        if k < 0:
            raise ParameterError(f"top-k capacity must be >= 0, got {k}")
        self.k = k
        self.fallback = CountMinEstimator(depth, width, seed)
        # key -> [reads, writes]
        self.exact: Dict[Hashable, List[int]] = {}
        # (total when pushed, tiebreak, key); entries go stale as counts grow
        self._heap: List[Tuple[int, int, Hashable]] = []
        self._tiebreak = itertools.count()
        self.promotions = 0

    def _push(self, key: Hashable, total: int) -> None:
        heapq.heappush(self._heap, (total, next(self._tiebreak), key))

    def _min_entry(self) -> Tuple[int, Hashable]:
        """Smallest exact-table total; repairs stale heap entries on the way."""
        while True:
            total, _, key = self._heap[0]
            entry = self.exact.get(key)
            if entry is None:
                heapq.heappop(self._heap)
                continue
            current = entry[0] + entry[1]
            if current != total:
                heapq.heapreplace(self._heap, (current, next(self._tiebreak), key))
                continue
            return total, key

    def record(self, key: Hashable, op: Op) -> None:
        slot = 1 if op is Op.WRITE else 0
        entry = self.exact.get(key)
        if entry is not None:
            entry[slot] += 1
            return
        if len(self.exact) < self.k:
            entry = self.exact[key] = [0, 0]
            entry[slot] += 1
            self._push(key, 1)
            return

        self.fallback.record(key, op)
        if self.k == 0:
            return
        reads, writes = self.fallback.counts(key)
        min_total, min_key = self._min_entry()
        if reads + writes > min_total:
            demoted = self.exact.pop(min_key)
            heapq.heappop(self._heap)
            self.fallback.add_counts(min_key, demoted[0], demoted[1])
            self.exact[key] = [reads, writes]
            self._push(key, reads + writes)
            self.promotions += 1

    def counts(self, key: Hashable) -> Tuple[int, int]:
        entry = self.exact.get(key)
        if entry is not None:
            return entry[0], entry[1]
        return self.fallback.counts(key)

    def source_for(self, key: Hashable) -> EstimateSource:
        return EstimateSource.TOPK if key in self.exact else EstimateSource.COUNTMIN

    def memory_footprint(self) -> int:
        return self.k * ENTRY_BYTES + self.fallback.memory_footprint()
