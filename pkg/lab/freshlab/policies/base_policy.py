"""Base policy interface for interval-batched freshness decisions."""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import AbstractSet, Any, Callable, ClassVar, Dict, Hashable, Iterable, Optional, Tuple

from ..errors import ConfigError
from ..freshmodel import CostParams, PolicyKind
from ..sketch import Estimator


class PolicyConfigError(ConfigError):
    """Unknown policy descriptor or a policy missing what it needs."""
    pass


class PolicyAction(Enum):
    SEND_UPDATE = "update"
    SEND_INVALIDATE = "invalidate"
    DO_NOTHING = "nothing"


class TtlMode(Enum):
    EXPIRY = "expiry"
    POLLING = "polling"


@dataclass
class PolicyContext:
    """What a policy may consult at a boundary.

    ``is_resident`` is only wired for policies that declare
    ``uses_residency``; ``future`` only for those that declare ``uses_future``.
    ``invalidated`` is a live view of the backend's invalidated-key set.
    """

    costs: CostParams
    staleness_bound: float
    estimator: Optional[Estimator] = None
    is_resident: Optional[Callable[[Hashable], bool]] = None
    future: Optional[Any] = None
    invalidated: AbstractSet[Hashable] = field(default_factory=frozenset)
    boundary_index: int = 0

    @property
    def now(self) -> float:
        return self.boundary_index * self.staleness_bound


class BasePolicy(ABC):
    """Base class for freshness policies.

    Class attributes describe what the simulator must provide and how it
    must treat cache entries:
        name: descriptor name
        options: descriptor option -> (constructor argument, converter)
        ttl_mode: TTL hook behaviour, None for write-reactive policies
        model_kind: closed form in freshmodel, if any
    """

    name: ClassVar[str] = ""
    options: ClassVar[Dict[str, Tuple[str, Callable[[str], Any]]]] = {}
    ttl_mode: ClassVar[Optional[TtlMode]] = None
    model_kind: ClassVar[Optional[PolicyKind]] = None
    uses_estimator: ClassVar[bool] = False
    uses_residency: ClassVar[bool] = False
    uses_future: ClassVar[bool] = False

    @property
    def label(self) -> str:
        """Name as written in result tables."""
        return self.name

    def prepare(self, ctx: PolicyContext) -> None:
        """Called once before the first event."""
        if self.uses_estimator and ctx.estimator is None:
            raise PolicyConfigError(f"policy {self.name!r} needs a per-key estimator")

    def next_boundary(self, after: int) -> Optional[int]:
        """First boundary index > ``after`` at which the policy acts unprompted."""
        return None

    @abstractmethod
    def decide_batch(self, dirty_keys: Iterable[Hashable], ctx: PolicyContext) -> Dict[Hashable, PolicyAction]:
        """Map each dirty key (and any key the policy schedules) to an action."""
        pass


def decide_batch(
    policy: BasePolicy,
    dirty_keys: Iterable[Hashable],
    ctx: PolicyContext,
) -> Dict[Hashable, PolicyAction]:
    return policy.decide_batch(dirty_keys, ctx)
