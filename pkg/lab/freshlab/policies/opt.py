"""Omniscient optimal baseline and its brute-force oracle.

Each key's history is summarized per interval as (has_read, has_write). The
summary is order-insensitive: an interval with both a read and a write
leaves the key dirty.

With c_update < c_miss the optimum is greedy: defer a dirty key until the
boundary right before its next read interval and update it there. Otherwise
a dynamic program over the cache states of the key picks the schedule.
"""

import bisect
import logging
import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Dict, Hashable, Iterable, List, Optional, Sequence, Tuple

from ..errors import LabError
from ..freshmodel import CostParams, interval_index
from ..workload import Event, Op
from .base_policy import BasePolicy, PolicyAction, PolicyConfigError, PolicyContext

logger = logging.getLogger(__name__)

IntervalSummary = Sequence[Tuple[bool, bool]]

MAX_ORACLE_LENGTH = 25


class OracleError(LabError):
    """Oracle input is out of range."""
    pass


class CacheState(IntEnum):
    VALID_FRESH = 0
    VALID_STALE_DIRTY = 1
    INVALID = 2


@dataclass
class OptSchedule:
    """Sparse boundary -> {key: action} schedule with its cost."""

    staleness_bound: float
    actions: Dict[int, Dict[Hashable, PolicyAction]] = field(default_factory=dict)
    key_costs: Dict[Hashable, float] = field(default_factory=dict)
    total_cost: float = 0.0
    used_dp: bool = False
    _boundaries: Optional[List[int]] = field(default=None, repr=False)

    def add(self, boundary: int, key: Hashable, action: PolicyAction) -> None:
        self.actions.setdefault(boundary, {})[key] = action
        self._boundaries = None

    def at(self, boundary: int) -> Dict[Hashable, PolicyAction]:
        return self.actions.get(boundary, {})

    def action(self, boundary: int, key: Hashable) -> PolicyAction:
        return self.at(boundary).get(key, PolicyAction.DO_NOTHING)

    def next_boundary(self, after: int) -> Optional[int]:
        if self._boundaries is None:
            self._boundaries = sorted(self.actions)
        idx = bisect.bisect_right(self._boundaries, after)
        return self._boundaries[idx] if idx < len(self._boundaries) else None


def _greedy(summary: IntervalSummary, costs: CostParams) -> Tuple[float, List[PolicyAction]]:
    total = 0.0
    pending = False
    actions = []
    for has_read, has_write in summary:
        action = PolicyAction.DO_NOTHING
        if has_read and pending:
            action = PolicyAction.SEND_UPDATE
            total += costs.c_update
            pending = False
        actions.append(action)
        if has_write:
            pending = True
    return total, actions


def _after_interval(state: CacheState, has_read: bool, has_write: bool, costs: CostParams):
    """(state, cost) after one interval, or None if the interval cannot be served."""
    cost = 0.0
    if has_read:
        if state is CacheState.VALID_STALE_DIRTY:
            return None
        if state is CacheState.INVALID:
            cost = costs.c_miss
            state = CacheState.VALID_FRESH
    if has_write and state is CacheState.VALID_FRESH:
        state = CacheState.VALID_STALE_DIRTY
    return state, cost


def _dp(summary: IntervalSummary, costs: CostParams) -> Tuple[float, List[PolicyAction]]:
    """Minimum-cost schedule over {update, invalidate, nothing} per boundary."""
    states = list(CacheState)
    inf = math.inf
    # cost of each state at the end of the previous interval
    pre = [inf, inf, inf]
    pre[CacheState.VALID_FRESH] = 0.0
    # per interval: entering state -> (state before action, action); exit state -> entering state
    enter_ptr: List[List[Optional[Tuple[CacheState, PolicyAction]]]] = []
    exit_ptr: List[List[Optional[CacheState]]] = []

    for j, (has_read, has_write) in enumerate(summary):
        entering = [inf, inf, inf]
        eptr: List[Optional[Tuple[CacheState, PolicyAction]]] = [None, None, None]
        for s in states:
            base = pre[s]
            if base == inf:
                continue
            moves = [(s, PolicyAction.DO_NOTHING, base)]
            if j > 0:
                moves.append((CacheState.VALID_FRESH, PolicyAction.SEND_UPDATE, base + costs.c_update))
                if s is not CacheState.INVALID:
                    moves.append((CacheState.INVALID, PolicyAction.SEND_INVALIDATE, base + costs.c_invalidate))
            for target, action, cost in moves:
                if cost < entering[target]:
                    entering[target] = cost
                    eptr[target] = (s, action)

        after = [inf, inf, inf]
        xptr: List[Optional[CacheState]] = [None, None, None]
        for s in states:
            if entering[s] == inf:
                continue
            outcome = _after_interval(s, has_read, has_write, costs)
            if outcome is None:
                continue
            target, cost = outcome
            total = entering[s] + cost if cost else entering[s]
            if total < after[target]:
                after[target] = total
                xptr[target] = s
        enter_ptr.append(eptr)
        exit_ptr.append(xptr)
        pre = after

    if not summary:
        return 0.0, []
    final = min(states, key=lambda s: (pre[s], int(s)))
    best = pre[final]

    actions: List[PolicyAction] = [PolicyAction.DO_NOTHING] * len(summary)
    state = final
    for j in range(len(summary) - 1, -1, -1):
        entering_state = exit_ptr[j][state]
        prev_state, action = enter_ptr[j][entering_state]
        actions[j] = action
        state = prev_state
    return best, actions


def opt_oracle_dp(summary: IntervalSummary, costs: CostParams, max_length: int = MAX_ORACLE_LENGTH) -> float:
    """Exact minimum cost of serving one key's interval summary.

    Reads must find a copy refreshed past every earlier write, or an invalid
    entry (one miss per such interval). The key starts fresh in the cache.

    Raises:
        OracleError: summary longer than ``max_length``
    """
    if len(summary) > max_length:
        raise OracleError(f"oracle sequence too long: {len(summary)} > {max_length}")
    return _dp([(bool(r), bool(w)) for r, w in summary], costs)[0]


def interval_summaries(events: Iterable[Event], staleness_bound: float) -> Dict[Hashable, List[List]]:
    """key -> [[interval, has_read, has_write], ...] over intervals with events."""
    timelines: Dict[Hashable, List[List]] = {}
    for event in events:
        n = interval_index(event.time, staleness_bound)
        timeline = timelines.get(event.key)
        if timeline is None:
            timeline = timelines[event.key] = []
        if not timeline or timeline[-1][0] != n:
            timeline.append([n, False, False])
        if event.op is Op.WRITE:
            timeline[-1][2] = True
        else:
            timeline[-1][1] = True
    return timelines


def opt_decide(events: Iterable[Event], staleness_bound: float, costs: CostParams) -> OptSchedule:
    """Omniscient per-key schedule for a full event stream."""
    use_dp = costs.c_update >= costs.c_miss
    if use_dp:
        logger.warning(
            "c_update (%s) >= c_miss (%s): optimal schedule falls back to dynamic programming",
            costs.c_update,
            costs.c_miss,
        )
    schedule = OptSchedule(staleness_bound=staleness_bound, used_dp=use_dp)
    total = 0.0
    for key, timeline in interval_summaries(events, staleness_bound).items():
        summary = [(has_read, has_write) for _, has_read, has_write in timeline]
        cost, actions = _dp(summary, costs) if use_dp else _greedy(summary, costs)
        for (boundary, _, _), action in zip(timeline, actions):
            if action is not PolicyAction.DO_NOTHING:
                schedule.add(boundary, key, action)
        schedule.key_costs[key] = cost
        total += cost
    schedule.total_cost = total
    logger.debug(
        "optimal schedule: %d keys, %d active boundaries, cost %.6g",
        len(schedule.key_costs),
        len(schedule.actions),
        total,
    )
    return schedule


class OptPolicy(BasePolicy):
    """Replays the omniscient schedule, skipping updates to non-resident keys."""

    name = "opt"
    uses_future = True
    uses_residency = True

    def __init__(self):
        self.schedule: Optional[OptSchedule] = None

    def prepare(self, ctx: PolicyContext) -> None:
        super().prepare(ctx)
        if ctx.future is None:
            raise PolicyConfigError("policy 'opt' needs the future event stream")
        self.schedule = opt_decide(ctx.future, ctx.staleness_bound, ctx.costs)

    def next_boundary(self, after: int) -> Optional[int]:
        return self.schedule.next_boundary(after) if self.schedule else None

    def decide_batch(self, dirty_keys: Iterable[Hashable], ctx: PolicyContext) -> Dict[Hashable, PolicyAction]:
        actions = {key: PolicyAction.DO_NOTHING for key in dirty_keys}
        for key, action in self.schedule.at(ctx.boundary_index).items():
            if action is PolicyAction.SEND_UPDATE and not ctx.is_resident(key):
                continue
            if action is PolicyAction.SEND_INVALIDATE and key in ctx.invalidated:
                continue
            actions[key] = action
        return actions
