"""Adaptive update-vs-invalidate policy driven by per-key estimates.

Estimator modes:
- ew:    E[W] = writes/reads from the estimator, decided with decide_from_ew
- rates: (lam, r) from the estimator counts over elapsed time, decided with
         decide_throughput (or decide_with_slo when an SLO is set)

Keys with no recorded read yet are invalidated.
"""

import logging
from typing import Dict, Hashable, Iterable, Optional

from ..freshmodel import (
    Decision,
    ModelParams,
    decide_from_ew,
    decide_throughput,
    decide_with_slo,
)
from .base_policy import BasePolicy, PolicyAction, PolicyConfigError, PolicyContext

logger = logging.getLogger(__name__)

ESTIMATOR_MODES = ("ew", "rates")


class AdaptivePolicy(BasePolicy):
    name = "adaptive"
    options = {
        "estimator": ("estimator_mode", str),
        "slo": ("slo", float),
    }
    uses_estimator = True

    def __init__(self, estimator_mode: str = "ew", slo: Optional[float] = None):
        if estimator_mode not in ESTIMATOR_MODES:
            raise PolicyConfigError(
                f"{self.name}: estimator must be one of {', '.join(ESTIMATOR_MODES)}, got {estimator_mode!r}"
            )
        if slo is not None and not 0.0 <= slo <= 1.0:
            raise PolicyConfigError(f"{self.name}: slo must lie in [0, 1], got {slo}")
        self.estimator_mode = estimator_mode
        self.slo = slo

    @property
    def label(self) -> str:
        parts = []
        if self.estimator_mode != "ew":
            parts.append(f"estimator={self.estimator_mode}")
        if self.slo is not None:
            parts.append(f"slo={self.slo:g}")
        return f"{self.name}:{','.join(parts)}" if parts else self.name

    def decide_key(self, key: Hashable, ctx: PolicyContext) -> Decision:
        estimate = ctx.estimator.estimate_ew(key)
        if not estimate.has_reads:
            return Decision.INVALIDATE
        if self.estimator_mode == "ew":
            decision = decide_from_ew(estimate.value, ctx.costs)
            if decision is Decision.INVALIDATE and self.slo is not None:
                # T -> 0 staleness clause: 1 - r > C
                write_share = estimate.writes / (estimate.reads + estimate.writes)
                if write_share > self.slo:
                    return Decision.UPDATE
            return decision

        elapsed = max(ctx.now, ctx.staleness_bound)
        total = estimate.reads + estimate.writes
        params = ModelParams(
            lam=total / elapsed,
            r=estimate.reads / total,
            staleness_bound=ctx.staleness_bound,
        )
        if self.slo is not None:
            return decide_with_slo(params, ctx.costs, self.slo)
        return decide_throughput(params, ctx.costs)

    def decide_batch(self, dirty_keys: Iterable[Hashable], ctx: PolicyContext) -> Dict[Hashable, PolicyAction]:
        actions = {}
        invalidated = ctx.invalidated
        for key in dirty_keys:
            if self.decide_key(key, ctx) is Decision.UPDATE:
                actions[key] = PolicyAction.SEND_UPDATE
            elif key in invalidated:
                actions[key] = PolicyAction.DO_NOTHING
            else:
                actions[key] = PolicyAction.SEND_INVALIDATE
        return actions


class AdaptiveCsPolicy(AdaptivePolicy):
    """Adaptive policy that also knows which keys the cache holds."""

    name = "adaptive-cs"
    uses_residency = True

    def decide_batch(self, dirty_keys: Iterable[Hashable], ctx: PolicyContext) -> Dict[Hashable, PolicyAction]:
        actions = {}
        resident = []
        for key in dirty_keys:
            if ctx.is_resident(key):
                resident.append(key)
            else:
                actions[key] = PolicyAction.DO_NOTHING
        actions.update(super().decide_batch(resident, ctx))
        return actions
