"""Command-line entry point wiring generation, training, prediction,
simulation and policy comparison into reproducible runs.

Output layout under a run directory:

    workload/spec.json, corpus.json, tasks.json   (gen)
    registry.json                                 (train)
    traces/<policy>-<seed>.events                 (simulate/compare)
    metrics.csv                                   (simulate/compare)
    compare.csv                                   (compare)

Exit codes: 0 success, 1 user error (single parsable line on stderr),
2 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import metrics as metrics_mod
from . import registry as registry_mod
from . import workload as workload_mod
from .errors import MemcoloError, UsageError
from .features import MINMAX, SCALING_MODES
from .metrics import MetricsReport, geomean, report_from_trace, write_metrics_csv
from .predictor import PredictorConfig
from .scheduler import ISOLATION, POLICIES
from .simulator import ClusterSpec, SimConfig, SimulatedProfiler, run, write_trace
from .workload import WorkloadSpec, generate_workload


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _load_scenario(path: str | None, seed: int | None) -> tuple[WorkloadSpec, ClusterSpec]:
    data = {}
    if path is not None:
        data = json.loads(Path(path).read_text())
    wl = dict(data.get("workload", {}))
    if seed is not None:
        wl["seed"] = seed
    try:
        spec = workload_mod.spec_from_dict(wl)
        cluster = ClusterSpec(**data.get("cluster", {}))
    except TypeError as exc:
        raise UsageError(f"bad scenario config: {exc}") from exc
    return spec, cluster


def _scenario_paths(workload_dir: str) -> tuple[Path, Path, Path]:
    d = Path(workload_dir)
    return d / "spec.json", d / "corpus.json", d / "tasks.json"


def _read_workload(workload_dir: str):
    spec_path, corpus_path, tasks_path = _scenario_paths(workload_dir)
    data = json.loads(spec_path.read_text())
    try:
        spec = workload_mod.spec_from_dict(data["workload"])
        cluster = ClusterSpec(**data["cluster"])
    except TypeError as exc:
        raise UsageError(f"bad workload spec: {exc}") from exc
    corpus = workload_mod.load_corpus(corpus_path)
    tasks = workload_mod.load_tasks(tasks_path)
    return spec, cluster, corpus, tasks


def _sim_config(args, spec: WorkloadSpec) -> SimConfig:
    noise = args.noise if args.noise is not None else spec.noise_level
    return SimConfig(
        kappa=args.kappa,
        noise_level=noise,
        predictor=PredictorConfig(headroom=args.headroom),
    )


def cmd_gen(args) -> int:
    spec, cluster = _load_scenario(args.spec, args.seed)
    programs, tasks = generate_workload(spec)
    out = Path(args.out) / "workload"
    out.mkdir(parents=True, exist_ok=True)
    resolved = {
        "workload": workload_mod.spec_to_dict(spec),
        "cluster": {
            "nodes": cluster.nodes,
            "node_memory_gb": cluster.node_memory_gb,
            "node_cores": cluster.node_cores,
        },
    }
    (out / "spec.json").write_text(json.dumps(resolved, indent=2) + "\n")
    workload_mod.save_corpus(programs, out / "corpus.json")
    workload_mod.save_tasks(tasks, out / "tasks.json")
    print(f"wrote workload ({len(programs)} programs, {len(tasks)} tasks) to {out}")
    return 0


def cmd_train(args) -> int:
    _, _, corpus, _ = _read_workload(args.workload)
    reg = registry_mod.train(
        corpus,
        scaling_mode=args.scaling,
        variance_target=args.variance_target,
        knn_threshold=args.threshold,
    )
    registry_mod.save(reg, args.out)
    print(f"trained registry with {len(reg.records)} records -> {args.out}")
    return 0


def cmd_predict(args) -> int:
    from .predictor import predict

    reg = registry_mod.load(args.registry)
    tasks = workload_mod.load_tasks(args.task)
    if not 0 <= args.index < len(tasks):
        raise UsageError(f"--index {args.index} out of range for {len(tasks)} task(s)")
    task = tasks[args.index]
    profiler = SimulatedProfiler(args.seed, args.noise)
    config = PredictorConfig(headroom=args.headroom)
    pred, reg = predict(task, reg, profiler, config)
    out = {
        "task": task.id,
        "name": task.name,
        "allocation_gb": pred.allocation_gb,
        "function": {"family": pred.function.family, "m": pred.function.m, "b": pred.function.b},
        "source": pred.source,
        "expert_id": pred.expert_id,
        "cpu_load": pred.cpu_load,
        "profiling_cost_s": pred.profiling_cost_s,
    }
    print(json.dumps(out, indent=2))
    if args.save_registry:
        registry_mod.save(reg, args.registry)
    return 0


def _run_one(cluster, tasks, policy, registry, seed, cfg, out_dir: Path) -> MetricsReport:
    trace = run(cluster, tasks, policy, registry=registry, seed=seed, config=cfg)
    traces = out_dir / "traces"
    traces.mkdir(parents=True, exist_ok=True)
    write_trace(trace, traces / f"{policy}-{seed}.events")
    return report_from_trace(trace)


def cmd_simulate(args) -> int:
    spec, cluster, corpus, tasks = _read_workload(args.workload)
    reg = registry_mod.load(args.registry) if args.registry else None
    cfg = _sim_config(args, spec)
    out_dir = Path(args.out)
    report = _run_one(cluster, tasks, args.policy, reg, args.seed, cfg, out_dir)
    write_metrics_csv([report], out_dir / "metrics.csv")
    print(json.dumps(metrics_mod.report_to_dict(report), indent=2))
    return 0


def cmd_compare(args) -> int:
    spec, cluster, corpus, tasks = _read_workload(args.workload)
    reg = registry_mod.load(args.registry) if args.registry else None
    cfg = _sim_config(args, spec)
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    for p in policies:
        if p not in POLICIES:
            raise UsageError(f"unknown policy {p!r}; choose from {', '.join(POLICIES)}")
    if ISOLATION not in policies:
        policies.insert(0, ISOLATION)  # the normalization baseline must run
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    if not seeds:
        raise UsageError("need at least one seed")

    out_dir = Path(args.out)
    reports: dict[str, list[MetricsReport]] = {p: [] for p in policies}
    for seed in seeds:
        for policy in policies:
            reports[policy].append(_run_one(cluster, tasks, policy, reg, seed, cfg, out_dir))
    write_metrics_csv([r for p in policies for r in reports[p]], out_dir / "metrics.csv")

    base_stp = {r.seed: r.stp for r in reports[ISOLATION]}
    base_antt_gm = geomean([r.antt for r in reports[ISOLATION]])
    rows = []
    for policy in policies:
        norm = [r.stp / base_stp[r.seed] for r in reports[policy]]
        antt_gm = geomean([r.antt for r in reports[policy]])
        rows.append(
            {
                "policy": policy,
                "norm_stp_geomean": geomean(norm),
                "norm_stp_min": min(norm),
                "norm_stp_max": max(norm),
                "antt_reduction_pct": (1.0 - antt_gm / base_antt_gm) * 100.0,
                "stp_geomean": geomean([r.stp for r in reports[policy]]),
                "antt_geomean": antt_gm,
            }
        )
    header = list(rows[0].keys())
    with (out_dir / "compare.csv").open("w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(row[k]) if isinstance(row[k], float) else str(row[k]) for k in header) + "\n")

    print(f"{'policy':<12} {'norm STP':>10} {'min':>8} {'max':>8} {'ANTT red.':>10}")
    for row in rows:
        print(
            f"{row['policy']:<12} {row['norm_stp_geomean']:>10.3f} {row['norm_stp_min']:>8.3f} "
            f"{row['norm_stp_max']:>8.3f} {row['antt_reduction_pct']:>9.1f}%"
        )
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="memcolo", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic workload")
    p.add_argument("--spec", help="scenario config JSON (defaults used when omitted)")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--seed", type=int, default=None, help="overrides the spec's seed")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train an expert registry from a workload corpus")
    p.add_argument("--workload", required=True, help="workload directory (from gen)")
    p.add_argument("--out", required=True, help="registry file to write")
    p.add_argument("--scaling", choices=SCALING_MODES, default=MINMAX)
    p.add_argument("--threshold", type=float, default=1.0, help="KNN distance threshold")
    p.add_argument("--variance-target", type=float, default=0.95)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict one task's memory allocation")
    p.add_argument("--registry", required=True)
    p.add_argument("--task", required=True, help="tasks.json file")
    p.add_argument("--index", type=int, default=0, help="task index within the file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.0, help="profiler noise level")
    p.add_argument("--headroom", type=float, default=0.0)
    p.add_argument("--save-registry", action="store_true", help="persist the updated registry")
    p.set_defaults(func=cmd_predict)

    for name, fn in (("simulate", cmd_simulate), ("compare", cmd_compare)):
        p = sub.add_parser(name, help=f"{name} policies on a generated workload")
        p.add_argument("--workload", required=True)
        p.add_argument("--registry", default=None, help="required for the moe policy")
        p.add_argument("--out", required=True)
        p.add_argument("--kappa", type=float, default=4.0, help="paging penalty coefficient")
        p.add_argument("--headroom", type=float, default=0.0)
        p.add_argument("--noise", type=float, default=None, help="override the spec's noise level")
        if name == "simulate":
            p.add_argument("--policy", choices=POLICIES, required=True)
            p.add_argument("--seed", type=int, default=0)
        else:
            p.add_argument("--policies", default=",".join(POLICIES))
            p.add_argument("--seeds", default="0")
        p.set_defaults(func=fn)

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (MemcoloError, OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports, not raises
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
