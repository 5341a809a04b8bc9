"""Freshness policies, located by plugin discovery."""

from typing import Union

from ..discovery import PluginDiscovery
from .base_policy import (
    BasePolicy,
    PolicyAction,
    PolicyConfigError,
    PolicyContext,
    TtlMode,
    decide_batch,
)

policy_discovery: PluginDiscovery[BasePolicy] = PluginDiscovery(__name__, BasePolicy, PolicyConfigError)

ALL_POLICIES = (
    "ttl-expiry",
    "ttl-polling",
    "update",
    "invalidate",
    "adaptive",
    "adaptive-cs",
    "opt",
)


def make_policy(descriptor: Union[str, BasePolicy]) -> BasePolicy:
    """Build a policy from a descriptor such as ``adaptive:estimator=ew,slo=0.05``."""
    if isinstance(descriptor, BasePolicy):
        return descriptor
    return policy_discovery.create(descriptor)


__all__ = [
    "ALL_POLICIES",
    "BasePolicy",
    "PolicyAction",
    "PolicyConfigError",
    "PolicyContext",
    "TtlMode",
    "decide_batch",
    "make_policy",
    "policy_discovery",
]
