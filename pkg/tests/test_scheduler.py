import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memcolo.errors import StateError
from memcolo.scheduler import (
    ISOLATION,
    MOE,
    ORACLE,
    SIMPLE,
    NodeState,
    PendingTask,
    RunningTask,
    admit,
    dispatch,
    on_completion,
    rebalance_threads,
)


def node(nid=0, mem=64.0, cores=16):
    return NodeState(nid, mem, cores)


def pending(tid, mem=None, cpu=0.2, arrival=0.0, req=None, isolation_only=False):
    return PendingTask(
        task_id=tid,
        arrival_time=arrival,
        demand_cpu=cpu,
        demand_memory=mem,
        isolation_only=isolation_only,
        requirement=req,
    )


# --- admission ----------------------------------------------------------------


def test_admit_empty_node():
    assert admit(node(), 32.0, 0.4)


def test_admit_memory_bound():
    n = node()
    n.allocated_memory = 60.0
    assert not admit(n, 5.0, 0.1)
    assert admit(n, 4.0, 0.1)  # boundary is inclusive


def test_admit_cpu_bound():
    n = node()
    n.cpu_load = 0.7
    assert not admit(n, 8.0, 0.4)  # 1.1 > 1.0
    assert admit(n, 8.0, 0.3)  # exactly 100% is allowed


# --- thread rebalancing ---------------------------------------------------------


def running(tid, start):
    return RunningTask(task_id=tid, allocation=4.0, threads=1, start_time=start, cpu_demand=0.1)


def test_rebalance_even_split():
    n = node()
    n.running = [running(0, 0.0), running(1, 1.0)]
    rebalance_threads(n)
    assert [rt.threads for rt in n.running] == [8, 8]


def test_rebalance_remainder_goes_to_earliest():
    n = node()
    n.running = [running(2, 5.0), running(0, 1.0), running(1, 3.0)]
    rebalance_threads(n)
    by_id = {rt.task_id: rt.threads for rt in n.running}
    assert by_id == {0: 6, 1: 5, 2: 5}
    assert sum(by_id.values()) == 16


def test_rebalance_single_task_gets_all_cores():
    n = node()
    n.running = [running(0, 0.0)]
    rebalance_threads(n)
    assert n.running[0].threads == 16


# --- dispatch -------------------------------------------------------------------


def test_dispatch_worked_example_colocation():
    nodes = [node(0, mem=32.0)]
    queue = [
        pending(0, mem=5.68, cpu=0.3, req=5.68),
        pending(1, mem=5.76, cpu=0.3, req=5.76),
        pending(2, mem=32.0, cpu=0.4, req=32.0),
    ]
    placements = dispatch(queue, nodes, MOE, now=0.0)
    assert [(p.task_id, p.node_id) for p in placements] == [(0, 0), (1, 0)]
    assert [t.task_id for t in queue] == [2]  # head blocks, no skipping
    assert nodes[0].allocated_memory == pytest.approx(5.68 + 5.76)
    assert {rt.task_id: rt.threads for rt in nodes[0].running} == {0: 8, 1: 8}


def test_dispatch_isolation_one_task_per_node():
    nodes = [node(0), node(1)]
    queue = [pending(0), pending(1), pending(2)]
    placements = dispatch(queue, nodes, ISOLATION, now=0.0)
    assert [(p.task_id, p.node_id) for p in placements] == [(0, 0), (1, 1)]
    assert placements[0].allocation == 64.0
    assert placements[0].threads == 16
    assert [t.task_id for t in queue] == [2]


def test_dispatch_strict_fcfs_blocks_behind_head():
    nodes = [node(0, mem=32.0)]
    queue = [pending(0, mem=30.0, req=30.0), pending(1, mem=1.0, req=1.0)]
    dispatch(queue, nodes, ORACLE, now=0.0)
    # head placed; next head (task 1) fits too
    assert not queue
    queue = [pending(2, mem=30.0, req=30.0), pending(3, mem=1.0, req=1.0)]
    placements = dispatch(queue, nodes, ORACLE, now=1.0)
    assert placements == []  # 30 GB head cannot fit; task 3 must not jump it
    assert [t.task_id for t in queue] == [2, 3]


def test_dispatch_oversized_demand_runs_isolated_on_idle_node():
    nodes = [node(0), node(1)]
    nodes[0].running = [running(9, 0.0)]
    queue = [pending(0, mem=100.0, cpu=0.2, req=100.0)]
    placements = dispatch(queue, nodes, MOE, now=0.0)
    assert len(placements) == 1
    assert placements[0].node_id == 1
    assert placements[0].allocation == 64.0  # all the memory it can get
    assert nodes[1].running[0].exclusive


def test_dispatch_simple_is_pairwise_and_uses_free_memory():
    nodes = [node(0)]
    queue = [
        pending(0, cpu=0.2, req=20.0),
        pending(1, cpu=0.2, req=30.0),
        pending(2, cpu=0.2, req=5.0),
    ]
    placements = dispatch(queue, nodes, SIMPLE, now=0.0)
    assert [(p.task_id, p.allocation) for p in placements] == [(0, 64.0), (1, 44.0)]
    assert [t.task_id for t in queue] == [2]  # two tasks per node, no third
    assert nodes[0].used_memory == pytest.approx(20.0 + 30.0)


def test_dispatch_simple_respects_cpu_constraint():
    nodes = [node(0), node(1)]
    queue = [pending(0, cpu=0.6, req=10.0), pending(1, cpu=0.6, req=10.0)]
    placements = dispatch(queue, nodes, SIMPLE, now=0.0)
    assert [(p.task_id, p.node_id) for p in placements] == [(0, 0), (1, 1)]


def test_dispatch_isolation_only_flag_takes_an_idle_node():
    nodes = [node(0), node(1)]
    nodes[0].running = [running(5, 0.0)]
    queue = [pending(4, mem=1.0, cpu=0.1, req=1.0, isolation_only=True)]
    placements = dispatch(queue, nodes, MOE, now=2.0)
    assert placements[0].node_id == 1
    assert placements[0].allocation == 64.0


# --- completion -----------------------------------------------------------------


def test_on_completion_frees_and_places_queued_task():
    nodes = [node(0, mem=32.0)]
    queue = [pending(1, mem=30.0, cpu=0.2, req=30.0)]
    dispatch([pending(0, mem=32.0, cpu=0.2, req=32.0)], nodes, ORACLE, now=0.0)
    assert nodes[0].allocated_memory == 32.0
    freed, rt, placements = on_completion(0, nodes, queue, ORACLE, now=10.0)
    assert freed.node_id == 0 and rt.task_id == 0
    assert [(p.task_id, p.allocation) for p in placements] == [(1, 30.0)]
    assert nodes[0].allocated_memory == pytest.approx(30.0)


def test_on_completion_resplits_threads():
    nodes = [node(0)]
    dispatch(
        [pending(0, mem=4.0, cpu=0.1, req=4.0), pending(1, mem=4.0, cpu=0.1, req=4.0),
         pending(2, mem=4.0, cpu=0.1, req=4.0)],
        nodes, ORACLE, now=0.0,
    )
    assert sorted(rt.threads for rt in nodes[0].running) == [5, 5, 6]
    on_completion(1, nodes, [], ORACLE, now=5.0)
    assert [rt.threads for rt in nodes[0].running] == [8, 8]


def test_on_completion_unknown_task():
    with pytest.raises(StateError):
        on_completion(99, [node(0)], [], ORACLE, now=0.0)


def test_oom_requeue_sorts_to_the_queue_front():
    waiting = pending(3, mem=10.0, arrival=1.0)
    retry = pending(9, mem=10.0, arrival=0.5, isolation_only=True)
    retry.front_rank = -1
    assert sorted([waiting, retry], key=lambda p: p.sort_key)[0] is retry


# --- first-fit oracle -------------------------------------------------------------


def _bruteforce_first_fit(demands, node_mem, node_cpu_load, physical, cores):
    """Independent reference: strict-FCFS first-fit, plain loops."""
    mem = list(node_mem)
    cpu = list(node_cpu_load)
    count = [0] * len(mem)
    out = []
    for tid, (dm, dc) in enumerate(demands):
        placed = None
        for nid in range(len(mem)):
            if count[nid] >= cores:
                continue
            if mem[nid] + dm <= physical and cpu[nid] + dc <= 1.0:
                placed = nid
                break
        if placed is None:
            break
        mem[placed] += dm
        cpu[placed] += dc
        count[placed] += 1
        out.append((tid, placed))
    return out


@given(
    st.lists(
        st.tuples(st.floats(0.5, 80.0), st.floats(0.05, 0.9)), min_size=1, max_size=12
    ),
    st.integers(1, 4),
    st.lists(st.floats(0.0, 0.8), min_size=4, max_size=4),
)
@settings(max_examples=80)
def test_dispatch_matches_bruteforce_first_fit(demands, n_nodes, preloads):
    physical, cores = 64.0, 16
    demands = [(dm, dc) for dm, dc in demands if dm <= physical]
    nodes = []
    for nid in range(n_nodes):
        n = node(nid, physical, cores)
        n.cpu_load = preloads[nid]
        nodes.append(n)
    queue = [pending(i, mem=dm, cpu=dc, req=dm) for i, (dm, dc) in enumerate(demands)]
    got = [(p.task_id, p.node_id) for p in dispatch(queue, nodes, ORACLE, now=0.0)]
    want = _bruteforce_first_fit(
        demands, [0.0] * n_nodes, preloads[:n_nodes], physical, cores
    )
    assert got == want
