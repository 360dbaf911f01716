import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memcolo.errors import IncompleteTrace
from memcolo.metrics import (
    aggregate,
    antt,
    report_from_trace,
    stp,
    write_metrics_csv,
)
from memcolo.scheduler import ISOLATION
from memcolo.simulator import ClusterSpec, SimConfig, SimTrace, TraceEvent, run
from memcolo.workload import WorkloadSpec, generate_workload


def trace_of(per_task, policy="test", seed=0):
    events = tuple(
        TraceEvent(0.0, "arrival", tid, None, {}) for tid in per_task
    ) + tuple(
        TraceEvent(c_cl, "completion", tid, 0, {}) for tid, (_, c_cl) in per_task.items()
    )
    return SimTrace(policy, seed, 1, 64.0, 16, events, dict(per_task))


def test_stp_all_unit_ratios():
    t = trace_of({i: (100.0, 100.0) for i in range(7)})
    assert stp(t) == pytest.approx(7.0)


def test_stp_mixed_ratios():
    t = trace_of({0: (100.0, 50.0), 1: (100.0, 200.0)})
    assert stp(t) == pytest.approx(2.0 + 0.5)


def test_stp_matches_spreadsheet_recomputation():
    rng = random.Random(4)
    per_task = {i: (rng.uniform(50, 500), rng.uniform(50, 900)) for i in range(10)}
    t = trace_of(per_task)
    expect = 0.0
    for c_is, c_cl in per_task.values():
        expect += c_is / c_cl
    assert stp(t) == pytest.approx(expect, rel=1e-12)


def test_antt_unit_and_simple_cases():
    assert antt(trace_of({0: (10.0, 10.0), 1: (5.0, 5.0)})) == pytest.approx(1.0)
    assert antt(trace_of({0: (10.0, 20.0), 1: (10.0, 40.0)})) == pytest.approx(3.0)


def test_antt_matches_independent_recomputation():
    rng = random.Random(9)
    per_task = {i: (rng.uniform(50, 500), rng.uniform(50, 900)) for i in range(12)}
    t = trace_of(per_task)
    ratios = [c_cl / c_is for c_is, c_cl in per_task.values()]
    assert antt(t) == pytest.approx(sum(ratios) / len(ratios), rel=1e-12)


def test_incomplete_trace_rejected():
    t = trace_of({0: (10.0, 10.0)})
    broken = SimTrace(
        t.policy, t.seed, 1, 64.0, 16,
        t.events + (TraceEvent(0.0, "arrival", 99, None, {}),), t.per_task,
    )
    with pytest.raises(IncompleteTrace):
        stp(broken)
    with pytest.raises(IncompleteTrace):
        antt(broken)


def test_aggregate_single_report_is_itself():
    rep = report_from_trace(trace_of({0: (10.0, 20.0)}))
    agg = aggregate([rep])
    assert agg.stp_geomean == pytest.approx(rep.stp)
    assert agg.antt_geomean == pytest.approx(rep.antt)
    assert agg.count == 1


def test_aggregate_geomean_of_two_and_eight():
    reps = [
        report_from_trace(trace_of({0: (2.0, 1.0)}, seed=0)),  # stp 2
        report_from_trace(trace_of({0: (8.0, 1.0)}, seed=1)),  # stp 8
    ]
    assert aggregate(reps).stp_geomean == pytest.approx(4.0)


def test_aggregate_matches_log_domain_oracle():
    rng = random.Random(1)
    reps = [
        report_from_trace(
            trace_of({i: (rng.uniform(10, 100), rng.uniform(10, 300)) for i in range(5)},
                     seed=s)
        )
        for s in range(20)
    ]
    agg = aggregate(reps)
    for field, values in (("stp_geomean", [r.stp for r in reps]),
                          ("antt_geomean", [r.antt for r in reps])):
        expect = math.exp(sum(math.log(v) for v in values) / len(values))
        assert getattr(agg, field) == pytest.approx(expect, rel=1e-12)
    assert agg.stp_min == min(r.stp for r in reps)
    assert agg.stp_max == max(r.stp for r in reps)


def test_aggregate_rejects_mixed_policies():
    a = report_from_trace(trace_of({0: (1.0, 1.0)}, policy="a"))
    b = report_from_trace(trace_of({0: (1.0, 1.0)}, policy="b"))
    with pytest.raises(ValueError):
        aggregate([a, b])


def test_isolation_single_node_bounds():
    # Queueing can only inflate turnaround: ANTT >= 1 and STP <= n.
    _, tasks = generate_workload(WorkloadSpec(seed=18, corpus_size=4, task_count=9))
    trace = run(ClusterSpec(nodes=1), tasks, ISOLATION, seed=0,
                config=SimConfig(noise_level=0.0))
    n = len(tasks)
    assert antt(trace) >= 1.0
    assert stp(trace) <= n + 1e-9


def test_metrics_csv_layout(tmp_path):
    rep = report_from_trace(trace_of({0: (10.0, 20.0)}, policy="isolation", seed=3))
    path = tmp_path / "metrics.csv"
    write_metrics_csv([rep], path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "policy,seed,n,stp,antt"
    assert lines[1].startswith("isolation,3,1,")


# --- properties ---------------------------------------------------------------

runtimes = st.tuples(st.floats(1.0, 1e4), st.floats(1.0, 1e4))


@given(st.dictionaries(st.integers(0, 50), runtimes, min_size=1, max_size=20))
@settings(max_examples=60)
def test_permutation_invariance(per_task):
    t = trace_of(per_task)
    shuffled = trace_of(dict(reversed(list(per_task.items()))))
    assert stp(t) == pytest.approx(stp(shuffled), rel=1e-12)
    assert antt(t) == pytest.approx(antt(shuffled), rel=1e-12)


@given(
    st.dictionaries(st.integers(0, 30), runtimes, min_size=1, max_size=15),
    st.floats(0.3, 1.0),
)
@settings(max_examples=60)
def test_dominance_monotonicity(per_task, shrink):
    # If every task finishes no later, STP cannot drop and ANTT cannot rise.
    a = trace_of(per_task)
    b = trace_of({tid: (c_is, c_cl * shrink) for tid, (c_is, c_cl) in per_task.items()})
    assert stp(b) >= stp(a) - 1e-12
    assert antt(b) <= antt(a) + 1e-12
