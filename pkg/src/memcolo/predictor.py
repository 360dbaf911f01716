"""Runtime memory-allocation prediction for incoming tasks.

The pipeline: (1) checksum lookup for exact binary reuse; (2) a short
profiling run to extract features and CPU load; (3) scaling + PCA
projection + nearest-expert selection; (4) two-point calibration of the
selected family on small input samples; (5) if no expert is close enough
(or calibration is impossible), learn a brand-new function from a small
size sweep and remember it; (6) evaluate the instantiated function at the
full input size. Every successful prediction is stored back into the
registry, so resubmitting the same binary is free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Protocol

from .errors import DegenerateInput, DomainError, PredictionError, Unsolvable
from .features import FeatureSchema, FeatureVector, PcaModel, ScalingParams, ZSCORE
from .memfunc import EXPONENTIAL, NAPIERIAN_LOG, MemoryFunction, calibrate, select_best_fit
from .registry import Registry, TrainingRecord, lookup_checksum, select_expert
from .workload import Task, checksum_of

CHECKSUM_HIT = "checksum_hit"
KNN_EXPERT = "knn_expert"
NEW_FUNCTION = "new_function"


class ProfileResult(NamedTuple):
    features: FeatureVector
    memory_gb: float
    cpu_load: float
    wall_time_s: float


class Profiler(Protocol):
    """Runs a task on a small input sample and reports what it saw."""

    def profile(self, task, sample_size_gb: float) -> ProfileResult: ...


@dataclass(frozen=True)
class PredictorConfig:
    profile_size_gb: float = 0.2
    calib_fractions: tuple[float, float] = (0.05, 0.10)
    newfunc_fractions: tuple[float, ...] = (0.05, 0.10, 0.20, 0.40)
    profile_floor_gb: float = 0.05
    headroom: float = 0.0
    default_cpu_load: float = 1.0

    def __post_init__(self):
        f1, f2 = self.calib_fractions
        if not 0 < f1 < f2 <= 1:
            raise ValueError("calib_fractions must satisfy 0 < f1 < f2 <= 1")
        if self.profile_size_gb <= 0 or self.profile_floor_gb <= 0:
            raise ValueError("profiling sizes must be positive")
        if self.headroom < 0:
            raise ValueError("headroom must be >= 0")
        if len(self.newfunc_fractions) < 3:
            raise ValueError("need at least 3 new-function sample fractions")


@dataclass(frozen=True)
class Prediction:
    task_id: int
    allocation_gb: float
    function: MemoryFunction
    source: str
    expert_id: int | None
    cpu_load: float
    profiling_cost_s: float

    def __post_init__(self):
        if self.allocation_gb <= 0:
            raise ValueError("allocation must be positive")
        if not 0.0 <= self.cpu_load <= 1.0:
            raise ValueError("cpu_load must be in [0, 1]")
        if self.source not in (CHECKSUM_HIT, KNN_EXPERT, NEW_FUNCTION):
            raise ValueError(f"unknown prediction source {self.source!r}")


def round_up_allocation(memory_gb: float, headroom: float = 0.0) -> float:
    """Apply optional headroom, then round up to the next 0.01 GB."""
    raw = memory_gb * (1.0 + headroom)
    return max(0.01, math.ceil(raw * 100.0 - 1e-9) / 100.0)


def _calibration_sizes(input_size: float, config: PredictorConfig) -> tuple[float, float]:
    f1, f2 = config.calib_fractions
    floor = config.profile_floor_gb
    x1 = min(max(f1 * input_size, floor), input_size)
    x2 = min(max(f2 * input_size, floor), input_size)
    if x1 >= x2:
        # Tiny inputs collapse both clamps; keep the points distinct.
        x1 = x2 / 2.0
    return x1, x2


def _newfunc_sizes(input_size: float, config: PredictorConfig) -> list[float]:
    floor = config.profile_floor_gb
    sizes = {min(max(f * input_size, floor), input_size) for f in config.newfunc_fractions}
    fallback = input_size
    while len(sizes) < 3:
        sizes.add(fallback)
        fallback /= 2.0
    return sorted(sizes)


def predict(
    task, registry: Registry, profiler: Profiler, config: PredictorConfig | None = None
) -> tuple[Prediction, Registry]:
    """Predict a memory allocation for ``task``; returns the updated registry.

    ``task`` needs ``id``, ``name``, ``checksum`` and ``input_size``
    attributes. Profiler failures raise PredictionError tagged with the
    pipeline step; a calibration that has no solution falls back to the
    new-function path instead of failing.
    """
    if config is None:
        config = PredictorConfig()
    input_size = task.input_size
    if input_size <= 0:
        raise DomainError("task input size must be positive")

    rec = lookup_checksum(registry, task.checksum)
    if rec is not None and rec.calibrated:
        cpu = rec.cpu_load if rec.cpu_load is not None else config.default_cpu_load
        alloc = round_up_allocation(rec.function.evaluate(input_size), config.headroom)
        pred = Prediction(task.id, alloc, rec.function, CHECKSUM_HIT, rec.id, cpu, 0.0)
        return pred, registry

    samples: dict[float, ProfileResult] = {}

    def run_profile(size: float, step: int) -> ProfileResult:
        if size not in samples:
            try:
                samples[size] = profiler.profile(task, size)
            except Exception as exc:
                raise PredictionError(step, str(exc)) from exc
        return samples[size]

    probe = run_profile(min(config.profile_size_gb, input_size), step=2)
    cpu = min(max(probe.cpu_load, 0.0), 1.0)

    pc = registry.transform(probe.features)
    selection = select_expert(registry, pc)

    func: MemoryFunction | None = None
    source, expert_id = NEW_FUNCTION, None
    if selection.record is not None:
        x1, x2 = _calibration_sizes(input_size, config)
        y1 = run_profile(x1, step=4).memory_gb
        y2 = run_profile(x2, step=4).memory_gb
        try:
            func = calibrate(selection.record.function.family, (x1, y1), (x2, y2))
            source, expert_id = KNN_EXPERT, selection.record.id
        except (Unsolvable, DomainError, DegenerateInput):
            func = None
    if func is None:
        points = [(s, run_profile(s, step=5).memory_gb) for s in _newfunc_sizes(input_size, config)]
        winner, _ = select_best_fit(points)
        func = winner.function

    alloc = round_up_allocation(func.evaluate(input_size), config.headroom)
    record = TrainingRecord(
        id=registry.next_id(),
        name=task.name,
        checksum=task.checksum,
        raw_features=probe.features,
        pc_features=pc,
        function=func,
        calibrated=True,
        cpu_load=cpu,
    )
    cost = sum(r.wall_time_s for r in samples.values())
    pred = Prediction(task.id, alloc, func, source, expert_id, cpu, cost)
    return pred, registry.with_record(record)


# --- worked three-task scheduling example ----------------------------------

_EXAMPLE_FEATURES = {
    "wordcount": (-0.13, 0.12, 0.18, 0.10, 0.10),
    "terasort": (-0.68, 0.48, -0.51, 0.44, -0.65),
    "kmeans": (1.32, -0.51, 0.08, -0.72, 0.43),
}
_EXAMPLE_INPUTS = {"wordcount": 279.0, "terasort": 30.0, "kmeans": 512.0}
_EXAMPLE_TARGETS = {"wordcount": 5.68, "terasort": 5.76, "kmeans": 32.00}


def build_worked_example_fixture() -> tuple[Registry, tuple[Task, Task, Task]]:
    """A two-expert registry plus three tasks with engineered ground truth.

    The registry holds a sort-like exponential expert and a pagerank-like
    log expert, placed in feature space so that wordcount and terasort
    select the former and kmeans the latter. Scaling and projection are
    identity transforms, so the tasks' normalised feature values survive
    the pipeline verbatim. Each task's ground-truth curve is constructed
    so that two-point calibration lands on allocations of 5.68, 5.76 and
    32.00 GB: the published target values fix the curve at the full input
    size, while the shape coefficients keep visible curvature at the 5%
    and 10% calibration samples.
    """
    schema = FeatureSchema(("in", "cs", "r", "bo", "cm"))
    dim = schema.dim
    scaling = ScalingParams(ZSCORE, schema.schema_id, (0.0,) * dim, (1.0,) * dim)
    identity = tuple(tuple(1.0 if i == j else 0.0 for j in range(dim)) for i in range(dim))
    pca = PcaModel(schema.schema_id, (0.0,) * dim, identity, (1.0 / dim,) * dim)

    wc, ts, km = (
        _EXAMPLE_FEATURES["wordcount"],
        _EXAMPLE_FEATURES["terasort"],
        _EXAMPLE_FEATURES["kmeans"],
    )
    sort_pos = tuple((a + b) / 2.0 for a, b in zip(wc, ts))
    pagerank_pos = tuple(v + (0.1 if i == dim - 1 else 0.0) for i, v in enumerate(km))

    def record(rid, name, pos, func):
        return TrainingRecord(
            id=rid,
            name=name,
            checksum=checksum_of(f"fixture:{name}"),
            raw_features=schema.vector(pos),
            pc_features=FeatureVector(pos, pca.pc_schema_id),
            function=func,
        )

    registry = Registry(
        schema,
        scaling,
        pca,
        (
            record(0, "sortlike", sort_pos, MemoryFunction(EXPONENTIAL, 5.768, 4.479)),
            record(1, "pageranklike", pagerank_pos, MemoryFunction(NAPIERIAN_LOG, 16.333, 1.79)),
        ),
    )

    truths = {
        "wordcount": MemoryFunction(EXPONENTIAL, _EXAMPLE_TARGETS["wordcount"], 0.05),
        "terasort": MemoryFunction(EXPONENTIAL, _EXAMPLE_TARGETS["terasort"], 0.5),
        "kmeans": MemoryFunction(
            NAPIERIAN_LOG, _EXAMPLE_TARGETS["kmeans"] - 1.79 * math.log(512.0), 1.79
        ),
    }
    runtimes = {"wordcount": 600.0, "terasort": 300.0, "kmeans": 1200.0}
    cpu = {"wordcount": 0.3, "terasort": 0.3, "kmeans": 0.4}
    tasks = tuple(
        Task(
            id=i,
            name=name,
            checksum=checksum_of(f"fixture-task:{name}"),
            arrival_time=0.0,
            input_size=_EXAMPLE_INPUTS[name],
            ground_truth=truths[name],
            cpu_load=cpu[name],
            base_runtime=runtimes[name],
            latent_features=schema.vector(_EXAMPLE_FEATURES[name]),
        )
        for i, name in enumerate(("wordcount", "terasort", "kmeans"))
    )
    return registry, tasks
