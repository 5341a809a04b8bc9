"""TTL policies. They never act at boundaries; the simulator applies their
per-entry deadlines."""

from typing import Dict, Hashable, Iterable

from ..freshmodel import PolicyKind
from .base_policy import BasePolicy, PolicyAction, PolicyContext, TtlMode


class TtlExpiryPolicy(BasePolicy):
    """Drop the cached copy T after it was fetched."""

    name = "ttl-expiry"
    ttl_mode = TtlMode.EXPIRY
    model_kind = PolicyKind.TTL_EXPIRY

    def decide_batch(self, dirty_keys: Iterable[Hashable], ctx: PolicyContext) -> Dict[Hashable, PolicyAction]:
        return {key: PolicyAction.DO_NOTHING for key in dirty_keys}


class TtlPollingPolicy(BasePolicy):
    """Re-fetch the cached copy every T."""

    name = "ttl-polling"
    ttl_mode = TtlMode.POLLING
    model_kind = PolicyKind.TTL_POLLING

    def decide_batch(self, dirty_keys: Iterable[Hashable], ctx: PolicyContext) -> Dict[Hashable, PolicyAction]:
        return {key: PolicyAction.DO_NOTHING for key in dirty_keys}
