"""Closed-form freshness model for a single cached object.

Requests to an object arrive as a Poisson process with rate ``lam``; each
request is a read with probability ``r``. Time is cut into intervals of the
staleness bound T and costs are accumulated over a horizon T'.

COST METRICS:
- freshness cost C_F: throughput overhead in cost units (updates, invalidates,
  polls and stale-miss services)
- staleness cost C_S: number of reads that missed because the resident copy
  was stale

Everything here is a pure function of its arguments.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from .errors import LabError, ParameterError

logger = logging.getLogger(__name__)

# times this close to n*T, relative to t/T, fall on boundary n
BOUNDARY_RTOL = 1e-9


class ModelError(LabError):
    """A model quantity is undefined for the given parameters."""
    pass


@dataclass(frozen=True)
class ModelParams:
    """Workload and freshness parameters of one object.

    Args:
        lam: mean request rate (requests per second, > 0)
        r: probability that a request is a read (0 <= r <= 1)
        staleness_bound: T in seconds (> 0)
        horizon: T' in seconds, defaults to ``staleness_bound``
    """

    lam: float
    r: float
    staleness_bound: float
    horizon: Optional[float] = None

    def __post_init__(self):
        if self.horizon is None:
            object.__setattr__(self, "horizon", self.staleness_bound)
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ParameterError(f"lam must be a positive finite rate, got {self.lam}")
        if not 0.0 <= self.r <= 1.0:
            raise ParameterError(f"r must lie in [0, 1], got {self.r}")
        if not (self.staleness_bound > 0 and math.isfinite(self.staleness_bound)):
            raise ParameterError(f"staleness_bound must be positive, got {self.staleness_bound}")
        if self.horizon < self.staleness_bound:
            raise ParameterError(
                f"horizon ({self.horizon}) must be >= staleness_bound ({self.staleness_bound})"
            )

    @property
    def intervals(self) -> float:
        """Number of staleness intervals in the horizon, T'/T."""
        return self.horizon / self.staleness_bound

    @property
    def expected_reads(self) -> float:
        return self.lam * self.r * self.horizon


@dataclass(frozen=True)
class CostParams:
    """Per-message costs in abstract cost units.

    ``latency_priority`` stands in for an infinite miss cost: every decision
    rule answers Update while ``c_miss`` stays finite for accounting.
    """

    c_update: float
    c_invalidate: float
    c_miss: float
    c_serve: float = 1.0
    latency_priority: bool = False

    def __post_init__(self):
        for name in ("c_update", "c_invalidate", "c_miss", "c_serve"):
            value = getattr(self, name)
            if not (value >= 0 and math.isfinite(value)):
                raise ParameterError(f"{name} must be a finite non-negative cost, got {value}")
        if self.c_update >= self.c_miss and not self.latency_priority:
            logger.warning(
                "c_update (%s) >= c_miss (%s): updates are not cheaper than misses, "
                "model comparisons assume otherwise",
                self.c_update,
                self.c_miss,
            )


@dataclass(frozen=True)
class PolicyCosts:
    freshness_cost: float
    staleness_cost: float


class Decision(Enum):
    UPDATE = "update"
    INVALIDATE = "invalidate"


class ThresholdMode(Enum):
    """How decide_throughput turns the gap analysis into a rule."""

    CLOSED_FORM = "threshold"
    GAP_ARGMIN = "gap"


class PolicyKind(Enum):
    """Policies that have a closed form."""

    TTL_EXPIRY = "ttl-expiry"
    TTL_POLLING = "ttl-polling"
    UPDATE = "update"
    INVALIDATE = "invalidate"


def interval_index(time: float, staleness_bound: float) -> int:
    """Interval holding ``time``; boundary n sits at n*T, before interval n.

    Times within a relative ``BOUNDARY_RTOL`` of n*T land on boundary n, so
    0.3 with T=0.1 is interval 3 even though 0.3/0.1 < 3 in floating point.
    """
    q = time / staleness_bound
    nearest = round(q)
    if abs(q - nearest) <= BOUNDARY_RTOL * max(1.0, abs(q)):
        return int(nearest)
    return int(math.floor(q))


def prob_read(p: ModelParams) -> float:
    """P_R(T): probability of at least one read in an interval."""
    return -math.expm1(-p.lam * p.r * p.staleness_bound)


def prob_write(p: ModelParams) -> float:
    """P_W(T): probability of at least one write in an interval."""
    return -math.expm1(-p.lam * (1.0 - p.r) * p.staleness_bound)


def _probs(p: ModelParams) -> Tuple[float, float]:
    return prob_read(p), prob_write(p)


def _stale_interval_rate(pr: float, pw: float) -> float:
    # P_R * P_W / (P_R + P_W): expected stale misses per interval under invalidation
    total = pr + pw
    if total == 0.0:
        return 0.0
    return pr * pw / total


def ttl_expiry_costs(p: ModelParams, c: CostParams) -> PolicyCosts:
    """One stale miss per interval that holds at least one read."""
    staleness = p.intervals * prob_read(p)
    return PolicyCosts(freshness_cost=staleness * c.c_miss, staleness_cost=staleness)


def ttl_polling_costs(p: ModelParams, c: CostParams) -> PolicyCosts:
    return PolicyCosts(freshness_cost=c.c_miss * p.intervals, staleness_cost=0.0)


def update_policy_costs(p: ModelParams, c: CostParams) -> PolicyCosts:
    """One batched update per interval that holds at least one write."""
    return PolicyCosts(
        freshness_cost=p.intervals * prob_write(p) * c.c_update,
        staleness_cost=0.0,
    )


def invalidation_stationary_p(p: ModelParams) -> float:
    """Stationary probability that the object is invalidated at a boundary.

    Degenerate inputs resolve to 0 when no write can happen and to 1 when no
    read can happen.
    """
    pr, pw = _probs(p)
    if pw == 0.0:
        return 0.0
    if pr == 0.0:
        return 1.0
    return pw / (pr + pw)


def invalidation_costs(p: ModelParams, c: CostParams) -> PolicyCosts:
    pr, pw = _probs(p)
    staleness = p.intervals * _stale_interval_rate(pr, pw)
    return PolicyCosts(
        freshness_cost=staleness * (c.c_miss + c.c_invalidate),
        staleness_cost=staleness,
    )


def _batched_stale_interval_rate(pr: float, pw: float) -> float:
    # P_R * P_W / (P_R + P_W - P_R * P_W)
    leave = pr + pw - pr * pw
    if leave <= 0.0:
        return 0.0
    return pr * pw / leave


def batched_invalidation_stationary_p(p: ModelParams) -> float:
    """Invalidated-state probability when a refill and a write share an interval.

    The event simulator keeps the interval's dirty mark across a miss-fill,
    so a refilled copy written in the same interval is invalidated again at
    the next boundary. The chain leaves the invalidated state with
    probability P_R (1 - P_W), giving P_W / (P_R + P_W - P_R P_W). Agrees
    with ``invalidation_stationary_p`` as lam*T -> 0.
    """
    pr, pw = _probs(p)
    if pw == 0.0:
        return 0.0
    return pw / (pr + pw - pr * pw)


def batched_invalidation_costs(p: ModelParams, c: CostParams) -> PolicyCosts:
    """Always-invalidate costs under the event simulator's interval chain.

    Every stale miss refills an invalidated copy and every invalidate is
    sent to a copy that is valid at the boundary, so both happen
    P_R P_W / (P_R + P_W - P_R P_W) times per interval.
    """
    pr, pw = _probs(p)
    staleness = p.intervals * _batched_stale_interval_rate(pr, pw)
    return PolicyCosts(
        freshness_cost=staleness * (c.c_miss + c.c_invalidate),
        staleness_cost=staleness,
    )


def policy_costs(p: ModelParams, c: CostParams, kind: PolicyKind) -> PolicyCosts:
    if kind is PolicyKind.TTL_EXPIRY:
        return ttl_expiry_costs(p, c)
    if kind is PolicyKind.TTL_POLLING:
        return ttl_polling_costs(p, c)
    if kind is PolicyKind.UPDATE:
        return update_policy_costs(p, c)
    if kind is PolicyKind.INVALIDATE:
        return invalidation_costs(p, c)
    raise ModelError(f"no closed form for policy {kind!r}")


def _expected_reads_or_raise(p: ModelParams) -> float:
    n_reads = p.expected_reads
    if n_reads <= 0.0:
        raise ModelError("undefined ratio: expected reads N_R = lam * r * T' is zero")
    return n_reads


def normalized_staleness(p: ModelParams, kind: PolicyKind) -> float:
    """C_S': stale misses per expected read, N_R = lam * r * T'.

    Raises:
        ModelError: when no reads are expected
    """
    _expected_reads_or_raise(p)
    if kind in (PolicyKind.TTL_POLLING, PolicyKind.UPDATE):
        return 0.0
    pr, pw = _probs(p)
    if kind is PolicyKind.TTL_EXPIRY:
        per_interval = pr
    elif kind is PolicyKind.INVALIDATE:
        per_interval = _stale_interval_rate(pr, pw)
    else:
        raise ModelError(f"no closed form for policy {kind!r}")
    # (T'/T) * x / (lam r T') simplifies to x / (lam r T)
    return per_interval / (p.lam * p.r * p.staleness_bound)


def normalized_freshness(p: ModelParams, c: CostParams, kind: PolicyKind) -> float:
    """C_F': freshness cost over the cost of serving every expected read."""
    n_reads = _expected_reads_or_raise(p)
    if c.c_serve == 0.0:
        raise ModelError("undefined ratio: c_serve is zero")
    return policy_costs(p, c, kind).freshness_cost / (n_reads * c.c_serve)


def invalidation_beats_expiry(p: ModelParams, c: CostParams) -> bool:
    """Whether invalidation has a lower freshness cost than TTL-expiry.

    Write-dominated objects can make expiry the cheaper of the two.
    """
    return invalidation_costs(p, c).freshness_cost < ttl_expiry_costs(p, c).freshness_cost


def update_threshold(p: ModelParams, c: CostParams) -> float:
    """Right-hand side of the update rule: P_R/(P_R+P_W) * (c_m + c_i)."""
    pr, pw = _probs(p)
    if pr + pw == 0.0:
        raise ModelError("threshold undefined: P_R + P_W is zero")
    return pr / (pr + pw) * (c.c_miss + c.c_invalidate)


def _gap_terms(k: float, p: ModelParams, c: CostParams) -> Tuple[float, float]:
    if not 0.0 <= k <= 1.0:
        raise ParameterError(f"update probability k must lie in [0, 1], got {k}")
    pr, pw = _probs(p)
    if pr + pw - pr * pw <= 0.0:
        raise ModelError("gap recurrence has no fixed point: P_R = P_W = 0")
    numerator = (
        (1.0 - k) * pr * (c.c_invalidate + c.c_miss - c.c_update)
        + k * (1.0 - pr) * pw * c.c_update
        + (1.0 - k) * (1.0 - pr) * pw * c.c_invalidate
    )
    return numerator, (1.0 - pr) * (1.0 - pw)


def gap(k: float, p: ModelParams, c: CostParams) -> float:
    """Expected gap G between the online policy and the omniscient one.

    Args:
        k: probability of choosing an update at a boundary

    Returns:
        G in cost units, the fixed point of
        G = A(k) + (1 - P_R)(1 - P_W) G
    """
    numerator, _ = _gap_terms(k, p, c)
    pr, pw = _probs(p)
    # 1 - (1-P_R)(1-P_W) written without cancellation
    return numerator / (pr + pw - pr * pw)


def gap_fixed_point(
    k: float,
    p: ModelParams,
    c: CostParams,
    max_steps: int = 10**6,
    rtol: float = 1e-15,
) -> float:
    """Iterate the gap recurrence from G = 0 until it stops moving."""
    numerator, skip = _gap_terms(k, p, c)
    value = 0.0
    for _ in range(max_steps):
        nxt = numerator + skip * value
        if abs(nxt - value) <= rtol * abs(nxt):
            return nxt
        value = nxt
    return value


def decide_throughput(
    p: ModelParams,
    c: CostParams,
    mode: ThresholdMode = ThresholdMode.CLOSED_FORM,
) -> Decision:
    """Pick update or invalidate to minimize throughput overhead.

    CLOSED_FORM updates iff c_u < P_R/(P_R+P_W) (c_m + c_i).
    GAP_ARGMIN updates iff G(k=1) < G(k=0). Ties go to Invalidate.
    """
    if c.latency_priority:
        return Decision.UPDATE
    if mode is ThresholdMode.CLOSED_FORM:
        if c.c_update < update_threshold(p, c):
            return Decision.UPDATE
        return Decision.INVALIDATE
    if gap(1.0, p, c) < gap(0.0, p, c):
        return Decision.UPDATE
    return Decision.INVALIDATE


def decide_with_slo(
    p: ModelParams,
    c: CostParams,
    slo: float,
    mode: ThresholdMode = ThresholdMode.CLOSED_FORM,
) -> Decision:
    """Throughput rule under a cap ``slo`` on the stale-miss ratio C_S'.

    Updates when the throughput rule prefers updates, or when invalidation
    would push C_S' above ``slo``. As T -> 0 this is the familiar
    ``(c_i + c_m) r > c_u or 1 - r > C``.
    """
    if not 0.0 <= slo <= 1.0:
        raise ParameterError(f"slo must lie in [0, 1], got {slo}")
    if c.latency_priority:
        return Decision.UPDATE
    if decide_throughput(p, c, mode) is Decision.UPDATE:
        return Decision.UPDATE
    if p.r > 0.0 and normalized_staleness(p, PolicyKind.INVALIDATE) > slo:
        return Decision.UPDATE
    return Decision.INVALIDATE


def decide_from_ew(ew: float, c: CostParams) -> Decision:
    """Rule driven by E[W], the expected number of writes between reads.

    Keeping the copy fresh costs E[W] updates per read; invalidating costs
    one invalidate plus one miss. Update iff E[W] c_u < c_m + c_i.
    """
    if not (ew >= 0 and math.isfinite(ew)):
        raise ParameterError(f"E[W] must be finite and non-negative, got {ew}")
    if c.latency_priority:
        return Decision.UPDATE
    if ew * c.c_update < c.c_miss + c.c_invalidate:
        return Decision.UPDATE
    return Decision.INVALIDATE


def stationary_by_power_iteration(p: ModelParams, squarings: int = 64) -> float:
    """Invalidated-state probability of the explicit interval chain.

    States are (valid, invalidated). A valid object is invalidated when its
    interval holds a write; an invalidated object is refilled when its
    interval holds a read. The transition matrix is raised to the power
    2**squarings by repeated squaring and its first row is returned.
    """
    pr, pw = _probs(p)
    if pr + pw == 0.0:
        raise ModelError("interval chain is not ergodic: P_R = P_W = 0")
    transition = np.array([[1.0 - pw, pw], [pr, 1.0 - pr]])
    power = transition.copy()
    for _ in range(squarings):
        nxt = power @ power
        if np.allclose(nxt, power, rtol=0.0, atol=1e-17):
            power = nxt
            break
        power = nxt
    return float(power[0, 1] / power[0].sum())


def simulate_interval_chain(p: ModelParams, intervals: int, seed: int = 0) -> float:
    """Monte-Carlo run of the interval chain; returns the invalidated fraction."""
    if intervals <= 0:
        raise ParameterError(f"intervals must be positive, got {intervals}")
    pr, pw = _probs(p)
    rng = np.random.default_rng(seed)
    reads = (rng.random(intervals) < pr).tolist()
    writes = (rng.random(intervals) < pw).tolist()
    invalidated = False
    count = 0
    for has_read, has_write in zip(reads, writes):
        if invalidated:
            if has_read:
                invalidated = False
        elif has_write:
            invalidated = True
        count += invalidated
    return count / intervals
