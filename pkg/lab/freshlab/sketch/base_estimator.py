"""Base estimator interface for per-key read/write statistics."""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Callable, ClassVar, Dict, Hashable, Optional, Tuple

from ..errors import LabError
from ..workload import Op


class SketchError(LabError):
    """Estimator misuse or an estimate that cannot be computed."""
    pass


class EstimateSource(Enum):
    EXACT = "exact"
    TOPK = "topk"
    COUNTMIN = "countmin"


@dataclass(frozen=True)
class EwEstimate:
    """Estimated expected writes between reads for one key.

    ``value`` is the ratio form writes/max(reads, 1). ``sample_mean`` is the
    three-counter form C1/C2, only available from exact tracking.
    """

    value: float
    source: EstimateSource
    support: int
    reads: int
    writes: int
    sample_mean: Optional[float] = None

    @property
    def has_reads(self) -> bool:
        return self.reads > 0


class Estimator(ABC):
    """Base class for per-key statistics estimators."""

    name: ClassVar[str] = ""
    options: ClassVar[Dict[str, Tuple[str, Callable[[str], object]]]] = {}

    @abstractmethod
    def record(self, key: Hashable, op: Op) -> None:
        """Account one request to ``key``."""
        pass

    @abstractmethod
    def counts(self, key: Hashable) -> Tuple[int, int]:
        """(reads, writes) as seen by this estimator."""
        pass

    @abstractmethod
    def source_for(self, key: Hashable) -> EstimateSource:
        pass

    @abstractmethod
    def memory_footprint(self) -> int:
        """Bytes of estimator state under fixed per-entry accounting."""
        pass

    def estimate_ew(self, key: Hashable) -> EwEstimate:
        reads, writes = self.counts(key)
        return EwEstimate(
            value=writes / max(reads, 1),
            source=self.source_for(key),
            support=reads + writes,
            reads=reads,
            writes=writes,
        )
