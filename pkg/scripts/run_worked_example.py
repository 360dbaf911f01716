#!/usr/bin/env python3
"""Walk the three-task scheduling example through the whole pipeline.

Prints each stage: checksum lookup, feature extraction, expert selection,
two-point calibration, allocation, and finally the schedule produced on a
single 32 GB node.
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from memcolo.predictor import build_worked_example_fixture, predict
from memcolo.registry import lookup_checksum
from memcolo.scheduler import MOE
from memcolo.simulator import ClusterSpec, SimConfig, SimulatedProfiler, run


def main() -> int:
    registry, tasks = build_worked_example_fixture()
    profiler = SimulatedProfiler(seed=0, noise_level=0.0)

    print("expert registry:")
    for rec in registry.records:
        f = rec.function
        print(f"  [{rec.id}] {rec.name:<13} {f.family:<14} m={f.m} b={f.b}")
    print()

    reg = registry
    for task in tasks:
        print(f"{task.name} (input {task.input_size:g} GB)")
        known = lookup_checksum(reg, task.checksum)
        print(f"  1. checksum {task.checksum[:8]}…: {'known' if known else 'new to the system'}")
        pred, reg = predict(task, reg, profiler)
        feats = ", ".join(f"{v:+.2f}" for v in task.latent_features.values)
        print(f"  2. profiled features: ({feats})")
        expert = reg.records[pred.expert_id]
        print(f"  3. nearest expert: {expert.name} -> family {pred.function.family}")
        print(f"  4. calibrated coefficients: m={pred.function.m:.4f} b={pred.function.b:.4f}")
        print(f"  5. predicted allocation: {pred.allocation_gb:.2f} GB "
              f"(profiling cost {pred.profiling_cost_s:.0f} s)")
        print()

    print("6. schedule on one 32 GB node (memory-aware co-location):")
    trace = run(ClusterSpec(nodes=1, node_memory_gb=32.0), tasks, MOE,
                registry=registry, seed=0, config=SimConfig(noise_level=0.0))
    names = {t.id: t.name for t in tasks}
    for e in trace.events:
        if e.kind in ("placement", "completion"):
            extra = f" ({e.data['allocation']:.2f} GB)" if e.kind == "placement" else ""
            print(f"  t={e.time:8.1f}s  {e.kind:<10} {names[e.task_id]}{extra}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
