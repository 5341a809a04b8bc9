"""Count-min sketch over read and write counts.

Rows hash with the multiply-add-shift family: a 64-bit MurmurHash3 digest x
of the key is mapped to ((a*x + b) mod 2**128) >> 64, then scaled onto the
row width. ``a`` (odd) and ``b`` are 128-bit and drawn from the run seed, so
two sketches built with the same seed share hash functions.
"""

import functools
import math
from typing import Hashable, Tuple

import mmh3
import numpy as np

from ..discovery import parse_bool
from ..errors import ParameterError
from ..workload import Op
from .base_estimator import EstimateSource, Estimator

COUNTER_BYTES = 8
# a and b per row
SEED_BYTES_PER_ROW = 32

_MASK128 = (1 << 128) - 1
_HASH_CACHE_SIZE = 1 << 16


def _key_digest(key: Hashable) -> int:
    return mmh3.hash64(str(key), signed=False)[0]


class CountMinSketch:
    """d x w counter array answering point queries with overestimates only.

    Args:
        depth: number of rows d
        width: counters per row w
        seed: hash seed
        conservative: raise only the cells that hold the current minimum
    """

    def __init__(self, depth: int = 4, width: int = 4096, seed: int = 0, conservative: bool = False):
        if depth < 1 or width < 1:
            raise ParameterError(f"count-min dimensions must be >= 1, got d={depth} w={width}")
        self.depth = depth
        self.width = width
        self.seed = seed
        self.conservative = conservative
        self.table = np.zeros((depth, width), dtype=np.int64)
        self.total = 0
        self._rows = np.arange(depth)

        rng = np.random.default_rng(seed)
        words = rng.integers(
            0, np.iinfo(np.uint64).max, size=(depth, 4), dtype=np.uint64, endpoint=True
        ).tolist()
        self._a = [((hi << 64) | lo) | 1 for hi, lo, _, _ in words]
        self._b = [(hi << 64) | lo for _, _, hi, lo in words]
        self._columns = functools.lru_cache(maxsize=_HASH_CACHE_SIZE)(self._hash_columns)

    @classmethod
    def from_error_bounds(cls, epsilon: float, delta: float, seed: int = 0) -> "CountMinSketch":
        """Size the sketch so estimates exceed truth by <= epsilon*N w.p. >= 1 - delta."""
        if not (0 < epsilon < 1 and 0 < delta < 1):
            raise ParameterError("epsilon and delta must lie in (0, 1)")
        return cls(depth=math.ceil(math.log(1.0 / delta)), width=math.ceil(math.e / epsilon), seed=seed)

    def _hash_columns(self, key: Hashable) -> Tuple[int, ...]:
        x = _key_digest(key)
        width = self.width
        return tuple(
            ((((a * x + b) & _MASK128) >> 64) * width) >> 64
            for a, b in zip(self._a, self._b)
        )

    def columns(self, key: Hashable) -> Tuple[int, ...]:
        return self._columns(key)

    def add(self, key: Hashable, count: int = 1) -> None:
        if count < 0:
            raise ParameterError("count-min counters only grow")
        if count == 0:
            return
        cols = list(self._columns(key))
        if self.conservative:
            cells = self.table[self._rows, cols]
            target = int(cells.min()) + count
            self.table[self._rows, cols] = np.maximum(cells, target)
        else:
            self.table[self._rows, cols] += count
        self.total += count

    def estimate(self, key: Hashable) -> int:
        return int(self.table[self._rows, list(self._columns(key))].min())

    def counter_bytes(self) -> int:
        return self.depth * self.width * COUNTER_BYTES

    def seed_bytes(self) -> int:
        return self.depth * SEED_BYTES_PER_ROW


class CountMinEstimator(Estimator):
    """Two count-min sketches (reads, writes) sharing one hash family."""

    name = "cms"
    options = {
        "d": ("depth", int),
        "w": ("width", int),
        "conservative": ("conservative", parse_bool),
    }

    def __init__(self, depth: int = 4, width: int = 4096, seed: int = 0, conservative: bool = False):
        self.reads = CountMinSketch(depth, width, seed, conservative)
        self.writes = CountMinSketch(depth, width, seed, conservative)

    @property
    def depth(self) -> int:
        return self.reads.depth

    @property
    def width(self) -> int:
        return self.reads.width

    def record(self, key: Hashable, op: Op) -> None:
        if op is Op.WRITE:
            self.writes.add(key)
        else:
            self.reads.add(key)

    def add_counts(self, key: Hashable, reads: int, writes: int) -> None:
        self.reads.add(key, reads)
        self.writes.add(key, writes)

    def counts(self, key: Hashable) -> Tuple[int, int]:
        return self.reads.estimate(key), self.writes.estimate(key)

    def source_for(self, key: Hashable) -> EstimateSource:
        return EstimateSource.COUNTMIN

    def memory_footprint(self) -> int:
        return self.reads.counter_bytes() + self.writes.counter_bytes() + self.reads.seed_bytes()
