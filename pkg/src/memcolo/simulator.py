"""Deterministic discrete-event cluster simulator.

Runs a task stream under one scheduling policy and produces a trace of
arrivals, profiling runs, placements, paging onsets, out-of-memory
failures and completions, plus per-task isolated/achieved runtimes for
the throughput metrics.

Execution model: each task carries ``base_runtime`` seconds of work (its
isolated runtime with all cores and enough memory). While it runs, work
accrues at rate 1/F where the slowdown factor F is the product of

* a core-share term: the CPU-bound fraction (= the task's CPU load)
  scales inversely with its share of the node's cores,
* an interference term: 1 + rate x (number of co-runners), capped,
* a paging term: 1 + kappa x (required - allocated)/required whenever the
  allocation is below the true requirement.

An allocation below a quarter of the requirement triggers an OOM event
shortly after start; the task restarts from zero, re-queued at the front
flagged isolation-only. A resource monitor settles each node's
dispatcher-visible CPU load toward the true aggregate at one-minute
ticks. Everything is driven by a single event loop ordered by
(time, event kind, task id), so identical inputs give identical traces.
"""

from __future__ import annotations

import heapq
import itertools
import json
import math
from bisect import insort
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .errors import DomainError, StateError
from .features import FeatureVector
from .predictor import PredictorConfig, ProfileResult, predict
from .registry import Registry
from .scheduler import (
    MOE,
    ORACLE,
    POLICIES,
    NodeState,
    PendingTask,
    Placement,
    dispatch,
    on_completion,
    remove_task,
)
from .workload import STREAM_PROFILER, Task, substream

# Event-kind ordering for simultaneous events: frees before admissions.
_KIND_ORDER = {"completion": 0, "oom": 1, "profile_end": 2, "arrival": 3, "tick": 4}
_ORDER_KIND = {v: k for k, v in _KIND_ORDER.items()}

ARRIVAL = "arrival"
PROFILE_START = "profile_start"
PROFILE_END = "profile_end"
PLACEMENT = "placement"
PAGING_ONSET = "paging_onset"
OOM = "oom"
COMPLETION = "completion"


@dataclass(frozen=True)
class ClusterSpec:
    nodes: int = 4
    node_memory_gb: float = 64.0
    node_cores: int = 16

    def __post_init__(self):
        if self.nodes < 1 or self.node_memory_gb <= 0 or self.node_cores < 1:
            raise ValueError("cluster needs >= 1 node with positive memory and cores")


@dataclass(frozen=True)
class SimConfig:
    kappa: float = 4.0
    interference_rate: float = 0.05
    interference_cap: float = 1.25
    oom_threshold: float = 0.25
    oom_delay_s: float = 30.0
    monitor_tick_s: float = 60.0
    monitor_tau_s: float = 300.0
    noise_level: float = 0.02
    predictor: PredictorConfig = field(default_factory=PredictorConfig)


@dataclass(frozen=True)
class TraceEvent:
    time: float
    kind: str
    task_id: int
    node_id: int | None
    data: dict


@dataclass(frozen=True)
class SimTrace:
    policy: str
    seed: int
    nodes: int
    node_memory_gb: float
    node_cores: int
    events: tuple[TraceEvent, ...]
    per_task: dict[int, tuple[float, float]]

    @property
    def task_count(self) -> int:
        return len({e.task_id for e in self.events if e.kind == ARRIVAL})


def paging_factor(allocation: float, requirement: float, kappa: float) -> float:
    """Slowdown from under-allocation; exactly 1 when the allocation suffices."""
    if allocation >= requirement:
        return 1.0
    return 1.0 + kappa * (requirement - allocation) / requirement


class SimulatedProfiler:
    """Profiler contract backed by ground truth plus seeded noise.

    Features are the task's latent vector plus Gaussian noise; measured
    memory is the ground-truth curve value with relative noise of the
    configured level. Wall time scales with the sampled fraction of the
    input, floored at 10 s and capped at 120 s. Results depend only on
    (seed, task, sample size), not on call order.
    """

    def __init__(self, seed: int = 0, noise_level: float = 0.0):
        self.seed = seed
        self.noise_level = noise_level

    def profile(self, task: Task, sample_size_gb: float) -> ProfileResult:
        if not 0 < sample_size_gb <= task.input_size:
            raise DomainError(
                f"sample size {sample_size_gb} outside (0, {task.input_size}]"
            )
        rng = substream(self.seed, STREAM_PROFILER, task.id, round(sample_size_gb * 1e6))
        latent = task.latent_features.as_array()
        feat_noise = rng.standard_normal(len(latent))
        mem_noise = float(rng.standard_normal())
        features = FeatureVector(
            tuple(latent + self.noise_level * feat_noise), task.latent_features.schema_id
        )
        memory = max(
            0.01,
            task.ground_truth.evaluate(sample_size_gb) * (1.0 + self.noise_level * mem_noise),
        )
        wall = min(120.0, max(10.0, task.base_runtime * sample_size_gb / task.input_size))
        return ProfileResult(features, memory, task.cpu_load, wall)


class _TaskRun:
    """Mutable per-task bookkeeping inside one simulation."""

    __slots__ = (
        "task",
        "demand_cpu",
        "demand_memory",
        "remaining",
        "node_id",
        "pf",
        "completion_seq",
        "oom_seq",
        "isolation_only",
        "done",
    )

    def __init__(self, task: Task):
        self.task = task
        self.demand_cpu = task.cpu_load
        self.demand_memory: float | None = None
        self.remaining = task.base_runtime
        self.node_id: int | None = None
        self.pf = 1.0
        self.completion_seq = -1
        self.oom_seq = -1
        self.isolation_only = False
        self.done = False


class _Simulation:
    def __init__(self, cluster, tasks, policy, registry, seed, config):
        if policy not in POLICIES:
            raise StateError(f"unknown policy {policy!r}")
        if policy == MOE and registry is None:
            raise StateError("the moe policy needs a trained registry")
        self.policy = policy
        self.registry = registry
        self.seed = seed
        self.config = config
        self.cluster = cluster
        self.nodes = [
            NodeState(i, cluster.node_memory_gb, cluster.node_cores) for i in range(cluster.nodes)
        ]
        self.tasks = {t.id: t for t in tasks}
        if len(self.tasks) != len(tasks):
            raise StateError("task ids must be unique")
        self.states = {t.id: _TaskRun(t) for t in tasks}
        self.profiler = SimulatedProfiler(seed, config.noise_level)
        self.queue: list[PendingTask] = []
        self.events: list[TraceEvent] = []
        self.per_task: dict[int, tuple[float, float]] = {}
        self.heap: list[tuple[float, int, int, int]] = []
        self.seqs = itertools.count()
        self.clock = 0.0
        self.unfinished = len(tasks)
        self.front_rank = 0

    # -- event plumbing -----------------------------------------------------

    def _push(self, time: float, kind: str, task_id: int, seq: int = 0) -> None:
        heapq.heappush(self.heap, (time, _KIND_ORDER[kind], task_id, seq))

    def _emit(self, kind: str, task_id: int, node_id: int | None = None, **data) -> None:
        self.events.append(TraceEvent(self.clock, kind, task_id, node_id, data))

    # -- execution model ----------------------------------------------------

    def _factor(self, st: _TaskRun, threads: int, n_running: int) -> float:
        # CPU-bound work stretches once the task's core share drops below
        # what it actually uses; tasks that never need 100% of the CPU run
        # unharmed until then.
        c = st.task.cpu_load
        share = threads / self.cluster.node_cores
        core = (1.0 - c) + c * max(1.0, c / share)
        interf = min(
            1.0 + self.config.interference_rate * (n_running - 1), self.config.interference_cap
        )
        return core * interf * st.pf

    def _advance(self, now: float) -> None:
        dt = now - self.clock
        if dt > 0:
            for node in self.nodes:
                n = len(node.running)
                for rt in node.running:
                    st = self.states[rt.task_id]
                    st.remaining -= dt / self._factor(st, rt.threads, n)
        self.clock = now

    def _reschedule_completions(self, node_ids: set[int]) -> None:
        for nid in node_ids:
            node = self.nodes[nid]
            n = len(node.running)
            for rt in node.running:
                st = self.states[rt.task_id]
                st.completion_seq = next(self.seqs)
                if st.oom_seq >= 0:
                    continue  # this placement dies of OOM instead
                eta = max(st.remaining, 0.0) * self._factor(st, rt.threads, n)
                self._push(self.clock + eta, COMPLETION, rt.task_id, st.completion_seq)

    def _check_node_invariants(self) -> None:
        for node in self.nodes:
            if node.running:
                total = sum(rt.threads for rt in node.running)
                if total != node.cores or any(rt.threads < 1 for rt in node.running):
                    raise StateError(f"thread split broken on node {node.node_id}")
            if self.policy in (MOE, ORACLE) and node.allocated_memory > node.physical_memory + 1e-9:
                raise StateError(f"node {node.node_id} memory over-allocated")
            # The monitored load never undershoots the true aggregate, so
            # CPU admission also bounds the true load at 100%.
            if node.active_cpu > 1.0 + 1e-9:
                raise StateError(f"node {node.node_id} CPU over-subscribed")

    # -- handlers -------------------------------------------------------------

    def _enqueue(self, st: _TaskRun) -> None:
        pending = PendingTask(
            task_id=st.task.id,
            arrival_time=st.task.arrival_time,
            demand_cpu=st.demand_cpu,
            demand_memory=st.demand_memory,
            isolation_only=st.isolation_only,
            front_rank=0,
            requirement=st.task.requirement(),
        )
        if st.isolation_only:
            self.front_rank -= 1
            pending.front_rank = self.front_rank
        insort(self.queue, pending, key=lambda p: p.sort_key)

    def _apply_placements(self, placements: list[Placement], extra_dirty=()) -> None:
        dirty = set(extra_dirty)
        for p in placements:
            st = self.states[p.task_id]
            st.node_id = p.node_id
            req = st.task.requirement()
            st.pf = paging_factor(p.allocation, req, self.config.kappa)
            self._emit(
                PLACEMENT,
                p.task_id,
                p.node_id,
                allocation=p.allocation,
                threads=p.threads,
            )
            if p.allocation < req:
                self._emit(
                    PAGING_ONSET, p.task_id, p.node_id, allocation=p.allocation, required=req,
                    factor=st.pf,
                )
            if p.allocation < self.config.oom_threshold * req:
                st.oom_seq = next(self.seqs)
                self._push(self.clock + self.config.oom_delay_s, OOM, p.task_id, st.oom_seq)
            else:
                st.oom_seq = -1
            dirty.add(p.node_id)
        if dirty:
            self._reschedule_completions(dirty)
            self._check_node_invariants()

    def _dispatch_now(self, extra_dirty=()) -> None:
        placements = dispatch(self.queue, self.nodes, self.policy, self.clock)
        self._apply_placements(placements, extra_dirty)

    def _on_arrival(self, task_id: int) -> None:
        st = self.states[task_id]
        task = st.task
        self._emit(ARRIVAL, task_id, input_size=task.input_size)
        if self.policy == MOE:
            pred, self.registry = predict(task, self.registry, self.profiler, self.config.predictor)
            st.demand_memory = pred.allocation_gb
            st.demand_cpu = pred.cpu_load
            if pred.profiling_cost_s > 0:
                self._emit(PROFILE_START, task_id, source=pred.source)
                self._push(self.clock + pred.profiling_cost_s, PROFILE_END, task_id)
                return
        elif self.policy == ORACLE:
            st.demand_memory = task.requirement()
        self._enqueue(st)
        self._dispatch_now()

    def _on_profile_end(self, task_id: int) -> None:
        st = self.states[task_id]
        self._emit(PROFILE_END, task_id, cost=self.clock - st.task.arrival_time)
        self._enqueue(st)
        self._dispatch_now()

    def _on_completion(self, task_id: int, seq: int) -> None:
        st = self.states[task_id]
        if seq != st.completion_seq or st.node_id is None or st.done:
            return
        node, _, placements = on_completion(task_id, self.nodes, self.queue, self.policy, self.clock)
        st.node_id = None
        st.done = True
        self.unfinished -= 1
        c_is = st.task.base_runtime
        c_cl = self.clock - st.task.arrival_time
        self.per_task[task_id] = (c_is, c_cl)
        self._emit(COMPLETION, task_id, node.node_id, c_is=c_is, c_cl=c_cl)
        self._apply_placements(placements, extra_dirty={node.node_id})

    def _on_oom(self, task_id: int, seq: int) -> None:
        st = self.states[task_id]
        if seq != st.oom_seq or st.node_id is None:
            return
        node, rt = remove_task(self.nodes, task_id)
        self._emit(OOM, task_id, node.node_id, allocation=rt.allocation,
                   required=st.task.requirement())
        st.node_id = None
        st.oom_seq = -1
        st.remaining = st.task.base_runtime  # restart from scratch
        st.isolation_only = True
        self._enqueue(st)
        self._dispatch_now(extra_dirty={node.node_id})

    def _on_tick(self) -> None:
        alpha = 1.0 - math.exp(-self.config.monitor_tick_s / self.config.monitor_tau_s)
        for node in self.nodes:
            diff = node.active_cpu - node.cpu_load
            if abs(diff) < 1e-12:
                node.cpu_load = node.active_cpu
            else:
                node.cpu_load += diff * alpha
        if self.unfinished > 0:
            self._push(self.clock + self.config.monitor_tick_s, "tick", -1)
            self._dispatch_now()

    # -- main loop ------------------------------------------------------------

    def run(self) -> SimTrace:
        for task in self.tasks.values():
            self._push(task.arrival_time, ARRIVAL, task.id)
        self._push(self.config.monitor_tick_s, "tick", -1)
        while self.heap:
            time, order, task_id, seq = heapq.heappop(self.heap)
            self._advance(time)
            kind = _ORDER_KIND[order]
            if kind == ARRIVAL:
                self._on_arrival(task_id)
            elif kind == PROFILE_END:
                self._on_profile_end(task_id)
            elif kind == COMPLETION:
                self._on_completion(task_id, seq)
            elif kind == OOM:
                self._on_oom(task_id, seq)
            else:
                self._on_tick()
        if self.unfinished:
            raise StateError(f"{self.unfinished} task(s) never completed")
        return SimTrace(
            policy=self.policy,
            seed=self.seed,
            nodes=self.cluster.nodes,
            node_memory_gb=self.cluster.node_memory_gb,
            node_cores=self.cluster.node_cores,
            events=tuple(self.events),
            per_task=dict(self.per_task),
        )


def run(
    cluster: ClusterSpec,
    tasks: Sequence[Task],
    policy: str,
    registry: Registry | None = None,
    seed: int = 0,
    config: SimConfig | None = None,
) -> SimTrace:
    """Simulate a task stream; see the module docstring for the model."""
    return _Simulation(cluster, list(tasks), policy, registry, seed, config or SimConfig()).run()


# --- trace serialization and audits ----------------------------------------


def trace_lines(trace: SimTrace):
    header = {
        "kind": "header",
        "policy": trace.policy,
        "seed": trace.seed,
        "nodes": trace.nodes,
        "node_memory_gb": trace.node_memory_gb,
        "node_cores": trace.node_cores,
    }
    yield json.dumps(header)
    for e in trace.events:
        yield json.dumps(
            {"t": e.time, "kind": e.kind, "task": e.task_id, "node": e.node_id, "data": e.data}
        )


def write_trace(trace: SimTrace, path) -> None:
    Path(path).write_text("\n".join(trace_lines(trace)) + "\n")


def max_allocated_per_node(trace: SimTrace) -> dict[int, float]:
    """Replay placements/frees and report each node's peak total allocation."""
    alloc: dict[int, float] = {}
    task_alloc: dict[int, tuple[int, float]] = {}
    peak: dict[int, float] = {}
    for e in trace.events:
        if e.kind == PLACEMENT:
            task_alloc[e.task_id] = (e.node_id, e.data["allocation"])
            alloc[e.node_id] = alloc.get(e.node_id, 0.0) + e.data["allocation"]
            peak[e.node_id] = max(peak.get(e.node_id, 0.0), alloc[e.node_id])
        elif e.kind in (COMPLETION, OOM) and e.task_id in task_alloc:
            nid, a = task_alloc.pop(e.task_id)
            alloc[nid] -= a
    return peak


def count_events(trace: SimTrace, kind: str) -> int:
    return sum(1 for e in trace.events if e.kind == kind)
