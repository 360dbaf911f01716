"""System throughput and normalized turnaround time from traces.

For task i let C_is be its isolated runtime (all memory, all cores, no
profiling) and C_cl its achieved turnaround (completion minus arrival,
including queueing and any profiling delay). Then

    STP  = sum_i C_is / C_cl          (higher is better)
    ANTT = (1/n) sum_i C_cl / C_is    (lower is better)

Replicated runs are summarised with geometric means.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import IncompleteTrace
from .simulator import ARRIVAL, SimTrace


def _finished_tasks(trace: SimTrace) -> dict[int, tuple[float, float]]:
    expected = {e.task_id for e in trace.events if e.kind == ARRIVAL} or set(trace.per_task)
    if not expected:
        raise IncompleteTrace("trace contains no tasks")
    missing = expected - set(trace.per_task)
    if missing:
        raise IncompleteTrace(f"tasks never completed: {sorted(missing)}")
    per_task = {tid: trace.per_task[tid] for tid in expected}
    if any(c_is <= 0 or c_cl <= 0 for c_is, c_cl in per_task.values()):
        raise IncompleteTrace("non-positive runtime in trace")
    return per_task


def stp(trace: SimTrace) -> float:
    """Aggregate progress of all tasks relative to isolated execution."""
    return sum(c_is / c_cl for c_is, c_cl in _finished_tasks(trace).values())


def antt(trace: SimTrace) -> float:
    """Mean per-task turnaround slowdown relative to isolated execution."""
    per_task = _finished_tasks(trace)
    return sum(c_cl / c_is for c_is, c_cl in per_task.values()) / len(per_task)


@dataclass(frozen=True)
class MetricsReport:
    policy: str
    seed: int
    n: int
    stp: float
    antt: float
    per_task: tuple[tuple[int, float, float], ...]

    def __post_init__(self):
        if self.n != len(self.per_task):
            raise ValueError("n must match the per-task rows")
        if any(c_is <= 0 or c_cl <= 0 for _, c_is, c_cl in self.per_task):
            raise ValueError("per-task runtimes must be positive")


def report_from_trace(trace: SimTrace) -> MetricsReport:
    per_task = _finished_tasks(trace)
    rows = tuple((tid, c_is, c_cl) for tid, (c_is, c_cl) in sorted(per_task.items()))
    return MetricsReport(trace.policy, trace.seed, len(rows), stp(trace), antt(trace), rows)


def geomean(values: Sequence[float]) -> float:
    vals = list(values)
    if not vals:
        raise ValueError("geomean of an empty sequence")
    if any(v <= 0 for v in vals):
        raise ValueError("geomean requires positive values")
    return math.exp(sum(math.log(v) for v in vals) / len(vals))


@dataclass(frozen=True)
class AggregateSummary:
    policy: str
    count: int
    stp_geomean: float
    antt_geomean: float
    stp_min: float
    stp_max: float
    antt_min: float
    antt_max: float


def aggregate(reports: Sequence[MetricsReport]) -> AggregateSummary:
    """Geometric-mean STP/ANTT (plus ranges) across same-policy replications."""
    reports = list(reports)
    if not reports:
        raise ValueError("need at least one report")
    policy = reports[0].policy
    if any(r.policy != policy for r in reports):
        raise ValueError("reports mix policies")
    stps = [r.stp for r in reports]
    antts = [r.antt for r in reports]
    return AggregateSummary(
        policy=policy,
        count=len(reports),
        stp_geomean=geomean(stps),
        antt_geomean=geomean(antts),
        stp_min=min(stps),
        stp_max=max(stps),
        antt_min=min(antts),
        antt_max=max(antts),
    )


def write_metrics_csv(reports: Sequence[MetricsReport], path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["policy", "seed", "n", "stp", "antt"])
        for r in reports:
            writer.writerow([r.policy, r.seed, r.n, repr(r.stp), repr(r.antt)])


def report_to_dict(report: MetricsReport) -> dict:
    return {
        "policy": report.policy,
        "seed": report.seed,
        "n": report.n,
        "stp": report.stp,
        "antt": report.antt,
        "per_task": [
            {"task": tid, "c_is": c_is, "c_cl": c_cl} for tid, c_is, c_cl in report.per_task
        ],
    }
