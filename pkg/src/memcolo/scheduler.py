"""FCFS task queue with memory- and CPU-aware co-location admission.

Four policies share one dispatch loop:

* ``isolation``  — one task per node, all memory and cores.
* ``simple``     — naive pairwise co-location; the co-locating task's
                   allocation is whatever memory is currently unused.
* ``moe``        — admission by predicted allocation and profiled CPU load.
* ``oracle``     — same admission rule fed ground-truth demands.

Dispatch scans the ready queue strictly from the front and stops at the
first task it cannot place (no skipping), trying nodes in ascending id
order. A task whose demand exceeds every node's physical memory, or one
re-queued after an out-of-memory failure, runs alone on the first fully
idle node with all of its memory. Scheduler state is owned by the
simulator's single event loop; nothing here is thread-safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import StateError

ISOLATION = "isolation"
SIMPLE = "simple"
MOE = "moe"
ORACLE = "oracle"
POLICIES = (ISOLATION, SIMPLE, MOE, ORACLE)

# Predictive policies place by predicted allocation; the others do not.
_PREDICTIVE = (MOE, ORACLE)

SIMPLE_MAX_TASKS = 2


@dataclass
class RunningTask:
    task_id: int
    allocation: float
    threads: int
    start_time: float
    cpu_demand: float
    usage: float = 0.0
    exclusive: bool = False


@dataclass
class NodeState:
    """One worker node as the dispatcher sees it.

    ``cpu_load`` is the dispatcher-visible CPU estimate: the resource
    monitor settles it toward the true aggregate load of the running
    tasks, and each placement bumps it by the newcomer's demand.
    ``used_memory`` tracks actual footprints (what the naive co-location
    policy treats as occupied), while ``allocated_memory`` tracks what the
    dispatcher handed out.
    """

    node_id: int
    physical_memory: float = 64.0
    cores: int = 16
    allocated_memory: float = 0.0
    cpu_load: float = 0.0
    active_cpu: float = 0.0
    used_memory: float = 0.0
    running: list[RunningTask] = field(default_factory=list)

    def find(self, task_id: int) -> RunningTask | None:
        for rt in self.running:
            if rt.task_id == task_id:
                return rt
        return None

    @property
    def idle(self) -> bool:
        return not self.running

    @property
    def has_exclusive(self) -> bool:
        return any(rt.exclusive for rt in self.running)


@dataclass(frozen=True)
class Placement:
    task_id: int
    node_id: int
    allocation: float
    threads: int
    start_time: float

    def __post_init__(self):
        if self.allocation <= 0:
            raise ValueError("allocation must be positive")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


@dataclass
class PendingTask:
    """Queue entry: what dispatch needs to know about a ready task.

    ``requirement`` is the true footprint (when the caller knows it); it
    only feeds the node's usage bookkeeping, never admission decisions.
    """

    task_id: int
    arrival_time: float
    demand_cpu: float
    demand_memory: float | None = None
    isolation_only: bool = False
    front_rank: int = 0
    requirement: float | None = None

    @property
    def sort_key(self) -> tuple[int, float, int]:
        return (self.front_rank, self.arrival_time, self.task_id)


def admit(node: NodeState, demand_memory: float, demand_cpu: float) -> bool:
    """Can this node take a task of the given demands right now?

    True iff the allocation fits in physical memory and the estimated
    aggregate CPU load stays at or below 100%. A free core slot is also
    required so every executor keeps at least one thread, and nodes
    running an isolation-mode task accept nothing.
    """
    if node.has_exclusive:
        return False
    if len(node.running) >= node.cores:
        return False
    return (
        node.allocated_memory + demand_memory <= node.physical_memory
        and node.cpu_load + demand_cpu <= 1.0
    )


def rebalance_threads(node: NodeState) -> NodeState:
    """Split the node's cores as evenly as possible across running tasks.

    Differences never exceed one; earlier-started tasks (ties by id)
    receive the remainder cores.
    """
    n = len(node.running)
    if n == 0:
        return node
    base, rem = divmod(node.cores, n)
    for i, rt in enumerate(sorted(node.running, key=lambda r: (r.start_time, r.task_id))):
        rt.threads = base + (1 if i < rem else 0)
    return node


def _apply_placement(
    node: NodeState, task: PendingTask, allocation: float, now: float, exclusive: bool
) -> Placement:
    usage = min(allocation, task.requirement) if task.requirement is not None else 0.0
    rt = RunningTask(
        task_id=task.task_id,
        allocation=allocation,
        threads=node.cores,
        start_time=now,
        cpu_demand=task.demand_cpu,
        usage=usage,
        exclusive=exclusive,
    )
    node.running.append(rt)
    node.allocated_memory += allocation
    node.cpu_load += task.demand_cpu
    node.active_cpu += task.demand_cpu
    node.used_memory += usage
    rebalance_threads(node)
    return Placement(task.task_id, node.node_id, allocation, rt.threads, now)


def _try_place(
    task: PendingTask, nodes: list[NodeState], policy: str, now: float
) -> Placement | None:
    oversized = (
        policy in _PREDICTIVE
        and task.demand_memory is not None
        and task.demand_memory > max(n.physical_memory for n in nodes)
    )
    if policy == ISOLATION or task.isolation_only or oversized:
        for node in nodes:
            if node.idle:
                return _apply_placement(node, task, node.physical_memory, now, exclusive=True)
        return None
    if policy == SIMPLE:
        for node in nodes:
            free = node.physical_memory - node.used_memory
            if (
                not node.has_exclusive
                and len(node.running) < min(SIMPLE_MAX_TASKS, node.cores)
                and free > 0.0
                and node.cpu_load + task.demand_cpu <= 1.0
            ):
                return _apply_placement(node, task, free, now, exclusive=False)
        return None
    if policy in _PREDICTIVE:
        if task.demand_memory is None:
            raise StateError(f"task {task.task_id} has no predicted allocation")
        for node in nodes:
            if admit(node, task.demand_memory, task.demand_cpu):
                return _apply_placement(node, task, task.demand_memory, now, exclusive=False)
        return None
    raise StateError(f"unknown policy {policy!r}")


def dispatch(
    queue: list[PendingTask], nodes: list[NodeState], policy: str, now: float
) -> list[Placement]:
    """Place tasks from the queue front until the head cannot be placed.

    Mutates ``queue`` (placed tasks are popped) and ``nodes``. Nodes are
    scanned in list order, which the simulator keeps id-ascending.
    """
    placements = []
    while queue:
        placed = _try_place(queue[0], nodes, policy, now)
        if placed is None:
            break
        queue.pop(0)
        placements.append(placed)
    return placements


def remove_task(nodes: list[NodeState], task_id: int) -> tuple[NodeState, RunningTask]:
    """Release a finished/failed task's resources and rebalance its node."""
    for node in nodes:
        rt = node.find(task_id)
        if rt is None:
            continue
        node.running.remove(rt)
        node.allocated_memory -= rt.allocation
        node.active_cpu -= rt.cpu_demand
        node.used_memory -= rt.usage
        rebalance_threads(node)
        return node, rt
    raise StateError(f"task {task_id} is not running on any node")


def on_completion(
    task_id: int, nodes: list[NodeState], queue: list[PendingTask], policy: str, now: float
) -> tuple[NodeState, RunningTask, list[Placement]]:
    """Free a completed task's resources, then re-run dispatch."""
    node, rt = remove_task(nodes, task_id)
    return node, rt, dispatch(queue, nodes, policy, now)
