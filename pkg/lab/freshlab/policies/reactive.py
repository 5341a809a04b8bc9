"""Write-reactive baselines: always update, always invalidate."""

from typing import Dict, Hashable, Iterable

from ..freshmodel import PolicyKind
from .base_policy import BasePolicy, PolicyAction, PolicyContext


class AlwaysUpdatePolicy(BasePolicy):
    name = "update"
    model_kind = PolicyKind.UPDATE

    def decide_batch(self, dirty_keys: Iterable[Hashable], ctx: PolicyContext) -> Dict[Hashable, PolicyAction]:
        return {key: PolicyAction.SEND_UPDATE for key in dirty_keys}


class AlwaysInvalidatePolicy(BasePolicy):
    """Invalidate dirty keys; keys already invalidated need no second message."""

    name = "invalidate"
    model_kind = PolicyKind.INVALIDATE

    def decide_batch(self, dirty_keys: Iterable[Hashable], ctx: PolicyContext) -> Dict[Hashable, PolicyAction]:
        invalidated = ctx.invalidated
        return {
            key: PolicyAction.DO_NOTHING if key in invalidated else PolicyAction.SEND_INVALIDATE
            for key in dirty_keys
        }
