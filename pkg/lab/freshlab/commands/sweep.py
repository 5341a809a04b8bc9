"""Sweep the staleness bound across policies, with model columns alongside.

Model columns sum the per-key closed forms over every key, each key with
its empirical (lam, r) and T' = the run horizon. Adaptive policies are
modelled as the per-key throughput choice between update and invalidate;
opt has no closed form and gets ``nan``.
"""

import logging
import math
from typing import Any, Dict, Hashable, Mapping, Tuple

from ..config import build_cost_params, build_workload_spec, command_schema, staleness_bounds
from ..discovery import parse_descriptor
from ..freshmodel import (
    CostParams,
    Decision,
    ModelParams,
    PolicyKind,
    decide_throughput,
    policy_costs,
)
from ..output import SWEEP_FIELDS, prepare_out_dir, write_table
from ..workload import estimate_all_key_params, generate
from .base_command import BaseCommand, CommandResult
from .simulate import EXIT_AUDIT_FAILED, report_points, run_points

logger = logging.getLogger(__name__)

CLOSED_FORMS = {kind.value: kind for kind in PolicyKind}
THROUGHPUT_CHOICE = ("adaptive", "adaptive-cs")


def model_columns(
    key_params: Mapping[Hashable, Tuple[float, float]],
    staleness_bound: float,
    horizon: float,
    policy_name: str,
    costs: CostParams,
) -> Dict[str, float]:
    """Summed closed-form costs of ``policy_name`` over all keys."""
    nan = {"model_c_f": math.nan, "model_c_s": math.nan, "model_c_f_norm": math.nan, "model_c_s_norm": math.nan}
    kind = CLOSED_FORMS.get(policy_name)
    if kind is None and policy_name not in THROUGHPUT_CHOICE:
        return nan

    horizon = max(horizon, staleness_bound)
    c_f = c_s = reads = 0.0
    for lam, r in key_params.values():
        p = ModelParams(lam=lam, r=r, staleness_bound=staleness_bound, horizon=horizon)
        chosen = kind
        if chosen is None:
            chosen = PolicyKind.UPDATE if decide_throughput(p, costs) is Decision.UPDATE else PolicyKind.INVALIDATE
        pc = policy_costs(p, costs, chosen)
        c_f += pc.freshness_cost
        c_s += pc.staleness_cost
        reads += p.expected_reads
    return {
        "model_c_f": c_f,
        "model_c_s": c_s,
        "model_c_f_norm": c_f / (reads * costs.c_serve) if reads and costs.c_serve else math.nan,
        "model_c_s_norm": c_s / reads if reads else math.nan,
    }


class SweepCommand(BaseCommand):
    name = "sweep"

    @property
    def description(self) -> str:
        return "Simulate policies over a log-spaced range of staleness bounds, with model columns"

    @property
    def input_schema(self) -> Dict[str, Any]:
        return command_schema(
            "workload",
            "costs",
            "sim",
            "output",
            overrides={
                "sim": {
                    "staleness_bounds": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "default": []},
                    "t_points": {"type": "integer", "minimum": 0, "default": 9},
                }
            },
        )

    async def execute(self, arguments: Dict[str, Any]) -> CommandResult:
        bounds = staleness_bounds(arguments["sim"])
        output = arguments["output"]
        out_dir = prepare_out_dir(output["dir"])
        costs = build_cost_params(arguments)
        events = generate(build_workload_spec(arguments))
        policies = arguments["sim"]["policies"]
        logger.info("sweep: %d events, %d policies, %d staleness bounds", len(events), len(policies), len(bounds))

        results = await run_points(arguments, bounds, events)

        horizon = arguments["sim"].get("horizon") or events.duration
        key_params = estimate_all_key_params(events, horizon) if len(events) else {}
        names = [parse_descriptor(policy)[0] for policy in policies]
        rows = []
        # results are T-major in the same policy order
        for index, result in enumerate(results):
            T = result.row["T"]
            row = dict(result.row)
            row.update(model_columns(key_params, T, horizon, names[index % len(names)], costs))
            rows.append(row)

        files = write_table(
            out_dir,
            "sweep",
            SWEEP_FIELDS,
            rows,
            output["format"],
            plot_columns=("c_f_norm", "c_s_norm", "model_c_f_norm", "model_c_s_norm"),
        )
        extra, violations = report_points(out_dir, "sweep", results, output["per_key"])
        files += extra

        summary = [f"sweep: {len(rows)} rows -> {', '.join(str(f) for f in files)}"]
        exit_code = 0
        if violations:
            summary.append(f"staleness audit FAILED: {violations} violations")
            exit_code = EXIT_AUDIT_FAILED
        return CommandResult(rows=rows, files=files, exit_code=exit_code, summary=summary)
