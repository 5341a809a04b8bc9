"""Closed-form cost tables from the analytical model."""

import logging
import math
from typing import Any, Dict, List, Sequence

from ..config import build_cost_params, command_schema, staleness_bounds
from ..freshmodel import (
    CostParams,
    ModelError,
    ModelParams,
    PolicyKind,
    normalized_freshness,
    normalized_staleness,
    policy_costs,
)
from ..output import ROW_FIELDS, prepare_out_dir, write_table
from .base_command import BaseCommand, CommandResult

logger = logging.getLogger(__name__)


def model_rows(
    lam: float,
    r: float,
    bounds: Sequence[float],
    kinds: Sequence[PolicyKind],
    costs: CostParams,
    horizon: float = 0.0,
) -> List[Dict[str, Any]]:
    """One row per (T, policy); ``horizon`` 0 means T' = T.

    ``reads``/``writes`` are expected counts over T'; ``stale_misses`` is C_S
    and ``cold_misses`` is always 0 (the model has no capacity misses).
    """
    rows = []
    for T in bounds:
        p = ModelParams(lam=lam, r=r, staleness_bound=T, horizon=horizon or None)
        for kind in kinds:
            pc = policy_costs(p, costs, kind)
            try:
                c_f_norm = normalized_freshness(p, costs, kind)
                c_s_norm = normalized_staleness(p, kind)
            except ModelError as e:
                logger.debug("%s at T=%g: %s", kind.value, T, e)
                c_f_norm = c_s_norm = math.nan
            rows.append(
                {
                    "T": T,
                    "policy": kind.value,
                    "c_f": pc.freshness_cost,
                    "c_s": pc.staleness_cost,
                    "c_f_norm": c_f_norm,
                    "c_s_norm": c_s_norm,
                    "reads": lam * r * p.horizon,
                    "writes": lam * (1.0 - r) * p.horizon,
                    "stale_misses": pc.staleness_cost,
                    "cold_misses": 0,
                }
            )
    return rows


class ModelCommand(BaseCommand):
    name = "model"

    @property
    def description(self) -> str:
        return "Evaluate the closed-form C_F/C_S of the TTL and write-reactive policies over T"

    @property
    def input_schema(self) -> Dict[str, Any]:
        return command_schema("model", "costs", "output")

    async def execute(self, arguments: Dict[str, Any]) -> CommandResult:
        section = arguments["model"]
        costs = build_cost_params(arguments)
        bounds = staleness_bounds(section)
        kinds = [PolicyKind(name) for name in section["policies"]]
        rows = model_rows(section["lam"], section["r"], bounds, kinds, costs, section["horizon"])

        output = arguments["output"]
        out_dir = prepare_out_dir(output["dir"])
        files = write_table(out_dir, "model", ROW_FIELDS, rows, output["format"])
        logger.info("model: %d rows over %d staleness bounds", len(rows), len(bounds))
        return CommandResult(
            rows=rows,
            files=files,
            summary=[f"model: {len(rows)} rows -> {', '.join(str(f) for f in files)}"],
        )
