"""Simulate every configured policy at one staleness bound.

Each (T, policy) point runs in its own CacheSimulator with a transcript, and
the transcript is audited for bounded-staleness violations. Any violation
makes the command exit with code 3.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from ..config import build_cost_params, build_workload_spec, command_schema, staleness_bounds
from ..errors import ConfigError
from ..freshmodel import CostParams
from ..output import PER_KEY_FIELDS, ROW_FIELDS, format_value, prepare_out_dir, safe_name, write_table
from ..policies import make_policy
from ..pool import SweepPool
from ..simcore import (
    CacheSimulator,
    FreshnessMetrics,
    MetricsError,
    SimConfig,
    StalenessViolation,
    audit_staleness,
    normalize,
)
from ..workload import EventStream, generate
from .base_command import BaseCommand, CommandResult

logger = logging.getLogger(__name__)

EXIT_AUDIT_FAILED = 3


@dataclass(frozen=True)
class PointTask:
    """One simulation point; pickled to a sweep worker."""

    events: EventStream
    config: SimConfig
    keep_transcript: bool = False


@dataclass
class PointResult:
    row: Dict[str, Any]
    per_key: List[Dict[str, Any]] = field(default_factory=list)
    transcript: Optional[List[str]] = None
    violations: List[StalenessViolation] = field(default_factory=list)


def metrics_row(T: float, label: str, metrics: FreshnessMetrics, costs: CostParams) -> Dict[str, Any]:
    try:
        c_f_norm, c_s_norm = normalize(metrics, costs)
    except MetricsError as e:
        logger.warning("%s at T=%g: %s", label, T, e)
        c_f_norm = (
            metrics.freshness_cost / (metrics.reads_total * costs.c_serve)
            if metrics.reads_total and costs.c_serve
            else math.nan
        )
        c_s_norm = (
            metrics.stale_misses / metrics.reads_with_resident_object
            if metrics.reads_with_resident_object
            else math.nan
        )
    return {
        "T": T,
        "policy": label,
        "c_f": metrics.freshness_cost,
        "c_s": metrics.stale_misses,
        "c_f_norm": c_f_norm,
        "c_s_norm": c_s_norm,
        "reads": metrics.reads_total,
        "writes": metrics.writes_total,
        "stale_misses": metrics.stale_misses,
        "cold_misses": metrics.cold_or_capacity_misses,
    }


def run_point(task: PointTask) -> PointResult:
    """Simulate, audit, and tabulate one point."""
    sim = CacheSimulator(task.config)
    metrics = sim.run(task.events)
    T = task.config.staleness_bound
    label = sim.policy.label
    violations = audit_staleness(sim.transcript, T)
    per_key = [
        {
            "T": T,
            "policy": label,
            "key": key,
            "reads": km.reads,
            "writes": km.writes,
            "hits": km.hits,
            "stale_misses": km.stale_misses,
            "cold_misses": km.cold_misses,
            "updates": km.updates,
            "invalidates": km.invalidates,
            "polls": km.polls,
            "c_f": km.freshness_cost,
        }
        for key, km in metrics.per_key.items()
    ]
    row = metrics_row(T, label, metrics, task.config.costs)
    logger.info(
        "%s T=%g: %d events, C_F'=%s C_S'=%s",
        label,
        T,
        len(task.events),
        format_value(row["c_f_norm"]),
        format_value(row["c_s_norm"]),
    )
    return PointResult(
        row=row,
        per_key=per_key,
        transcript=sim.transcript.lines() if task.keep_transcript else None,
        violations=violations,
    )


def sim_config(arguments: Dict[str, Any], T: float, policy: str, events: EventStream, costs: CostParams) -> SimConfig:
    sim = arguments["sim"]
    return SimConfig(
        staleness_bound=T,
        costs=costs,
        policy=policy,
        cache_capacity=sim["capacity"],
        seed=sim["seed"],
        horizon=sim.get("horizon"),
        warmup_events=int(sim["warmup_fraction"] * len(events)),
        ttl_alignment=sim["ttl_alignment"],
        invalidation_tracking_limit=sim["invalidation_tracking_limit"] or None,
        estimator=sim["estimator"],
        record_transcript=True,
        track_per_key=arguments["output"]["per_key"],
    )


def check_policies(descriptors: Sequence[str]) -> None:
    """Build every policy once so bad descriptors fail before any run starts."""
    for descriptor in descriptors:
        make_policy(descriptor)


async def run_points(arguments: Dict[str, Any], bounds: Sequence[float], events: EventStream) -> List[PointResult]:
    """All (T, policy) points, T-major, through the sweep pool."""
    costs = build_cost_params(arguments)
    policies = arguments["sim"]["policies"]
    check_policies(policies)
    keep = arguments["output"]["transcript"]
    tasks = [
        PointTask(events=events, config=sim_config(arguments, T, policy, events, costs), keep_transcript=keep)
        for T in bounds
        for policy in policies
    ]
    async with SweepPool(arguments["sim"]["workers"]) as pool:
        return await pool.map(run_point, tasks)


def report_points(out_dir: Path, stem: str, results: Sequence[PointResult], per_key: bool) -> Tuple[List[Path], int]:
    """Write per-key table and transcripts; returns (files, total violations)."""
    files: List[Path] = []
    if per_key:
        rows = [row for result in results for row in result.per_key]
        files += write_table(out_dir, f"{stem}_per_key", PER_KEY_FIELDS, rows, "csv")
    transcripts = [r for r in results if r.transcript is not None]
    if transcripts:
        transcript_dir = out_dir / "transcripts"
        transcript_dir.mkdir(parents=True, exist_ok=True)
        for result in transcripts:
            name = f"{stem}_{safe_name(result.row['policy'])}_T{format_value(result.row['T'])}.csv"
            path = transcript_dir / name
            path.write_text("".join(line + "\n" for line in result.transcript), encoding="utf-8")
            files.append(path)
    violations = 0
    for result in results:
        if result.violations:
            first = result.violations[0]
            logger.warning(
                "%s T=%g: %d staleness violations (first: key %r served at %g missed write at %g)",
                result.row["policy"],
                result.row["T"],
                len(result.violations),
                first.key,
                first.serve_time,
                first.write_time,
            )
            violations += len(result.violations)
    return files, violations


class SimulateCommand(BaseCommand):
    name = "simulate"

    @property
    def description(self) -> str:
        return "Run every configured policy over one workload at a single staleness bound"

    @property
    def input_schema(self) -> Dict[str, Any]:
        return command_schema("workload", "costs", "sim", "output")

    async def execute(self, arguments: Dict[str, Any]) -> CommandResult:
        bounds = staleness_bounds(arguments["sim"])
        if len(bounds) != 1:
            raise ConfigError(f"simulate takes exactly one staleness bound, got {len(bounds)}; use sweep")
        output = arguments["output"]
        out_dir = prepare_out_dir(output["dir"])
        events = generate(build_workload_spec(arguments))
        logger.info("simulate: %d events, %d policies, T=%g", len(events), len(arguments["sim"]["policies"]), bounds[0])

        results = await run_points(arguments, bounds, events)
        rows = [result.row for result in results]
        files = write_table(out_dir, "simulate", ROW_FIELDS, rows, output["format"])
        extra, violations = report_points(out_dir, "simulate", results, output["per_key"])
        files += extra

        summary = [f"simulate: {len(rows)} rows -> {', '.join(str(f) for f in files)}"]
        exit_code = 0
        if violations:
            summary.append(f"staleness audit FAILED: {violations} violations")
            exit_code = EXIT_AUDIT_FAILED
        return CommandResult(rows=rows, files=files, exit_code=exit_code, summary=summary)
