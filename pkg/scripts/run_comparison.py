#!/usr/bin/env python3
"""End-to-end policy comparison on freshly generated workloads.

Unlike `memcolo compare` (which replays one fixed workload under several
profiler seeds), this script regenerates workload + registry per seed and
aggregates normalized STP / ANTT reduction across them, which is how the
acceptance scenario is evaluated.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from memcolo.metrics import geomean, report_from_trace
from memcolo.predictor import PredictorConfig
from memcolo.registry import train
from memcolo.scheduler import ISOLATION, POLICIES
from memcolo.simulator import ClusterSpec, SimConfig, run
from memcolo.workload import WorkloadSpec, generate_workload


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=30, help="number of workload seeds")
    ap.add_argument("--tasks", type=int, default=20)
    ap.add_argument("--nodes", type=int, default=4)
    ap.add_argument("--noise", type=float, default=0.02)
    ap.add_argument("--headroom", type=float, default=0.10,
                    help="over-provisioning applied to moe predictions")
    ap.add_argument("--kappa", type=float, default=4.0)
    args = ap.parse_args()

    cluster = ClusterSpec(nodes=args.nodes)
    cfg = SimConfig(kappa=args.kappa, noise_level=args.noise,
                    predictor=PredictorConfig(headroom=args.headroom))
    norm_stp = {p: [] for p in POLICIES}
    antts = {p: [] for p in POLICIES}
    for seed in range(args.seeds):
        spec = WorkloadSpec(seed=seed, task_count=args.tasks, noise_level=args.noise)
        programs, tasks = generate_workload(spec)
        registry = train(programs)
        reports = {}
        for policy in POLICIES:
            trace = run(cluster, tasks, policy, registry=registry, seed=seed, config=cfg)
            reports[policy] = report_from_trace(trace)
        for policy in POLICIES:
            norm_stp[policy].append(reports[policy].stp / reports[ISOLATION].stp)
            antts[policy].append(reports[policy].antt)

    base_antt = geomean(antts[ISOLATION])
    print(f"{args.seeds} seeds x {args.tasks} tasks on {args.nodes} nodes "
          f"(noise {args.noise}, headroom {args.headroom})")
    print(f"{'policy':<12} {'norm STP (gm)':>14} {'min':>7} {'max':>7} {'ANTT reduction':>15}")
    for policy in POLICIES:
        gm = geomean(norm_stp[policy])
        reduction = (1.0 - geomean(antts[policy]) / base_antt) * 100.0
        print(f"{policy:<12} {gm:>14.3f} {min(norm_stp[policy]):>7.3f} "
              f"{max(norm_stp[policy]):>7.3f} {reduction:>14.1f}%")
    return 0


if __name__ == "__main__":
    sys.exit(main())
