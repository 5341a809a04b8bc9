"""Cost profiles: turn a declared bottleneck plus key/value sizes into CostParams.

The CPU profile prices each message by the serialization work at both ends
and the fixed cost of the operation it triggers. The network profile prices
each message by the bytes it puts on the wire.

CPU breakdown per message:
- miss:       cache ser(K) + deser(K+V) + update, store deser(K) + read + ser(K+V)
- invalidate: cache deser(K) + delete,            store ser(K)
- update:     cache deser(K+V) + update,          store ser(K+V)
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Optional

from .errors import ParameterError
from .freshmodel import CostParams

logger = logging.getLogger(__name__)


class CostProfileError(ParameterError):
    """Cost profile is incomplete or inconsistent."""
    pass


class Bottleneck(Enum):
    CPU = "cpu"
    NETWORK = "network"
    CUSTOM = "custom"


@dataclass(frozen=True)
class CostProfile:
    """Declarative description of what a message costs.

    Custom profiles take ``c_update``, ``c_invalidate`` and ``c_miss``
    verbatim; the other profiles ignore them.
    """

    bottleneck: Bottleneck = Bottleneck.CPU
    ser_per_byte: float = 1.0
    deser_per_byte: float = 1.0
    fixed_read: float = 0.0
    fixed_update_apply: float = 0.0
    fixed_delete: float = 0.0
    bytes_per_message_overhead: float = 0.0
    network_per_byte: float = 1.0
    c_update: Optional[float] = None
    c_invalidate: Optional[float] = None
    c_miss: Optional[float] = None
    prioritize_latency: bool = False

    def __post_init__(self):
        if isinstance(self.bottleneck, str):
            try:
                object.__setattr__(self, "bottleneck", Bottleneck(self.bottleneck))
            except ValueError:
                choices = ", ".join(b.value for b in Bottleneck)
                raise CostProfileError(
                    f"unknown bottleneck {self.bottleneck!r} (expected one of {choices})"
                ) from None
        for name in (
            "ser_per_byte",
            "deser_per_byte",
            "fixed_read",
            "fixed_update_apply",
            "fixed_delete",
            "bytes_per_message_overhead",
            "network_per_byte",
        ):
            if getattr(self, name) < 0:
                raise CostProfileError(f"{name} must be >= 0, got {getattr(self, name)}")
        overrides = (self.c_update, self.c_invalidate, self.c_miss)
        if self.bottleneck is Bottleneck.CUSTOM and any(v is None for v in overrides):
            raise CostProfileError(
                "custom cost profile requires c_update, c_invalidate and c_miss"
            )
        for value in overrides:
            if value is not None and value < 0:
                raise CostProfileError(f"cost overrides must be >= 0, got {value}")

    def scaled(self, factor: float) -> "CostProfile":
        """Multiply every coefficient by ``factor``."""
        if factor <= 0:
            raise CostProfileError(f"scale factor must be positive, got {factor}")

        def mul(value: Optional[float]) -> Optional[float]:
            return None if value is None else value * factor

        return CostProfile(
            bottleneck=self.bottleneck,
            ser_per_byte=self.ser_per_byte * factor,
            deser_per_byte=self.deser_per_byte * factor,
            fixed_read=self.fixed_read * factor,
            fixed_update_apply=self.fixed_update_apply * factor,
            fixed_delete=self.fixed_delete * factor,
            bytes_per_message_overhead=self.bytes_per_message_overhead,
            network_per_byte=self.network_per_byte * factor,
            c_update=mul(self.c_update),
            c_invalidate=mul(self.c_invalidate),
            c_miss=mul(self.c_miss),
            prioritize_latency=self.prioritize_latency,
        )

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "CostProfile":
        known = {k: v for k, v in values.items() if k in cls.__dataclass_fields__}
        return cls(**known)


def _cpu_costs(profile: CostProfile, key_size: float, value_size: float):
    def ser(nbytes: float) -> float:
        return profile.ser_per_byte * nbytes

    def deser(nbytes: float) -> float:
        return profile.deser_per_byte * nbytes

    kv = key_size + value_size
    c_miss = (
        ser(key_size) + deser(kv) + profile.fixed_update_apply
        + deser(key_size) + profile.fixed_read + ser(kv)
    )
    c_invalidate = deser(key_size) + profile.fixed_delete + ser(key_size)
    c_update = deser(kv) + profile.fixed_update_apply + ser(kv)
    return c_update, c_invalidate, c_miss


def _network_costs(profile: CostProfile, key_size: float, value_size: float):
    overhead = profile.bytes_per_message_overhead
    per_byte = profile.network_per_byte
    # miss: get request (K), response (K+V), fill acknowledgment to the store (K)
    c_miss = per_byte * ((key_size + overhead) + (key_size + value_size + overhead) + (key_size + overhead))
    c_invalidate = per_byte * (key_size + overhead)
    c_update = per_byte * (key_size + value_size + overhead)
    return c_update, c_invalidate, c_miss


def derive_costs(
    profile: CostProfile,
    key_size: float = 16,
    value_size: float = 128,
    c_serve: float = 1.0,
) -> CostParams:
    """Derive (c_u, c_i, c_m) for one key/value size.

    Args:
        profile: bottleneck profile
        key_size: key size in bytes (> 0)
        value_size: value size in bytes (>= 0)
        c_serve: per-read service cost carried into the result for C_F'

    Returns:
        CostParams; ``latency_priority`` is set when the profile prioritizes
        latency, which makes every decision rule pick Update.
    """
    if key_size <= 0:
        raise ParameterError(f"key_size must be > 0, got {key_size}")
    if value_size < 0:
        raise ParameterError(f"value_size must be >= 0, got {value_size}")

    if profile.bottleneck is Bottleneck.CPU:
        c_update, c_invalidate, c_miss = _cpu_costs(profile, key_size, value_size)
    elif profile.bottleneck is Bottleneck.NETWORK:
        c_update, c_invalidate, c_miss = _network_costs(profile, key_size, value_size)
    else:
        c_update, c_invalidate, c_miss = profile.c_update, profile.c_invalidate, profile.c_miss

    logger.debug(
        "derived costs (%s, K=%s, V=%s): c_u=%s c_i=%s c_m=%s",
        profile.bottleneck.value,
        key_size,
        value_size,
        c_update,
        c_invalidate,
        c_miss,
    )
    return CostParams(
        c_update=float(c_update),
        c_invalidate=float(c_invalidate),
        c_miss=float(c_miss),
        c_serve=float(c_serve),
        latency_priority=profile.prioritize_latency,
    )
