"""Synthetic workloads with known ground-truth resource behavior.

Stands in for real benchmark suites: each generated program belongs to one
memory-function family, its feature vector is drawn around a per-family
centroid (so same-family programs cluster in feature space), and its
ground-truth curve maps input size to peak memory footprint. A workload is
a training corpus plus a stream of arriving tasks; generation is fully
deterministic for a fixed seed.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import SpecError
from .features import FeatureSchema, FeatureVector
from .memfunc import EXPONENTIAL, FAMILY_ORDER, NAPIERIAN_LOG, POWER_LAW, MemoryFunction

DEFAULT_SCHEMA = ("in", "cs", "r", "bo", "cm")

# Named RNG sub-streams, so adding a consumer never perturbs the others.
STREAM_CORPUS = 1
STREAM_TASKS = 2
STREAM_ARRIVALS = 3
STREAM_PROFILER = 4

# Per-family base pattern, cycled over the schema dimensions. The
# centroids sit far apart relative to typical cluster spreads.
_CENTROID_PATTERNS = {
    POWER_LAW: (2.0, 0.0, -2.0),
    EXPONENTIAL: (-2.0, 2.0, 0.0),
    NAPIERIAN_LOG: (0.0, -2.0, 2.0),
}


def substream(seed: int, stream: int, *extra: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(stream), *[int(e) for e in extra]])


def checksum_of(text: str) -> str:
    return hashlib.md5(text.encode()).hexdigest()


def family_centroid(family: str, dim: int) -> tuple[float, ...]:
    pattern = _CENTROID_PATTERNS[family]
    return tuple(pattern[i % len(pattern)] for i in range(dim))


@dataclass(frozen=True)
class Task:
    """One application submission, with simulator-only ground truth."""

    id: int
    name: str
    checksum: str
    arrival_time: float
    input_size: float
    ground_truth: MemoryFunction
    cpu_load: float
    base_runtime: float
    latent_features: FeatureVector

    def __post_init__(self):
        if self.input_size <= 0:
            raise ValueError("input_size must be positive")
        if self.base_runtime <= 0:
            raise ValueError("base_runtime must be positive")
        if not 0.0 < self.cpu_load <= 1.0:
            raise ValueError("cpu_load must be in (0, 1]")
        if self.arrival_time < 0:
            raise ValueError("arrival_time must be non-negative")

    def requirement(self) -> float:
        """True peak memory footprint (GB) at this task's input size."""
        return self.ground_truth.evaluate(self.input_size)


@dataclass(frozen=True)
class TrainingProgram:
    """A corpus entry plus the generating ground truth (for evaluation)."""

    name: str
    checksum: str
    features: FeatureVector
    curve: tuple[tuple[float, float], ...]
    function: MemoryFunction

    @property
    def family(self) -> str:
        return self.function.family


@dataclass(frozen=True)
class WorkloadSpec:
    seed: int = 0
    task_count: int = 20
    corpus_size: int = 16
    family_mix: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    input_size_range: tuple[float, float] = (5.0, 80.0)
    requirement_range: tuple[float, float] = (5.0, 24.0)
    cpu_load_range: tuple[float, float] = (0.1, 0.4)
    base_runtime_range: tuple[float, float] = (600.0, 1800.0)
    arrival_spacing_s: float = 5.0
    spread: float = 0.2
    noise_level: float = 0.02
    schema_names: tuple[str, ...] = DEFAULT_SCHEMA
    curve_points: int = 8

    def __post_init__(self):
        object.__setattr__(self, "family_mix", tuple(float(p) for p in self.family_mix))
        object.__setattr__(self, "schema_names", tuple(self.schema_names))
        if self.task_count < 1:
            raise SpecError("task_count must be >= 1")
        if self.corpus_size < 2:
            raise SpecError("corpus_size must be >= 2")
        if len(self.family_mix) != len(FAMILY_ORDER) or any(p < 0 for p in self.family_mix):
            raise SpecError("family_mix needs one non-negative weight per family")
        if abs(sum(self.family_mix) - 1.0) > 1e-9:
            raise SpecError("family_mix must sum to 1")
        if self.spread < 0 or self.noise_level < 0:
            raise SpecError("spread and noise_level must be >= 0")
        for name, (lo, hi) in {
            "input_size_range": self.input_size_range,
            "requirement_range": self.requirement_range,
            "cpu_load_range": self.cpu_load_range,
            "base_runtime_range": self.base_runtime_range,
        }.items():
            if not 0 < lo <= hi:
                raise SpecError(f"{name} must satisfy 0 < lo <= hi")
        if self.cpu_load_range[1] > 1.0:
            raise SpecError("cpu_load_range must stay within (0, 1]")
        if self.requirement_range[0] < 2.0:
            raise SpecError("requirement_range lower bound must be >= 2 GB")
        if self.curve_points < 3:
            raise SpecError("curve_points must be >= 3")

    @property
    def schema(self) -> FeatureSchema:
        return FeatureSchema(self.schema_names)


def _loguniform(rng: np.random.Generator, lo: float, hi: float) -> float:
    return float(math.exp(rng.uniform(math.log(lo), math.log(hi))))


def _draw_function(
    rng: np.random.Generator, family: str, x_full: float, req: float
) -> MemoryFunction:
    """Coefficients whose curve hits ``req`` GB at ``x_full`` GB of input.

    Shape coefficients are kept in ranges where the curve bends visibly
    over profiled sample sizes (so two-point calibration is well posed)
    and, for the log family, stays positive down to 0.2 GB samples.
    """
    u = float(rng.uniform())
    if family == POWER_LAW:
        b = 0.3 + 0.6 * u
        return MemoryFunction(POWER_LAW, req / x_full**b, b)
    if family == EXPONENTIAL:
        b = (4.0 + 8.0 * u) / x_full
        return MemoryFunction(EXPONENTIAL, req / -math.expm1(-b * x_full), b)
    # Log family: fix the footprint drop over the profiled 20x size range
    # (full input down to its 5% sample). This keeps the curve positive at
    # every profiled size and steep enough to tell apart from a power law.
    drop = 0.35 + 0.30 * u
    b = drop * req / math.log(20.0)
    return MemoryFunction(NAPIERIAN_LOG, req - b * math.log(x_full), b)


def _draw_family(rng: np.random.Generator, mix: tuple[float, ...]) -> str:
    return FAMILY_ORDER[int(rng.choice(len(FAMILY_ORDER), p=mix))]


def _draw_features(
    rng: np.random.Generator, schema: FeatureSchema, family: str, spread: float
) -> FeatureVector:
    centroid = np.asarray(family_centroid(family, schema.dim))
    return schema.vector(centroid + spread * rng.standard_normal(schema.dim))


def generate_workload(spec: WorkloadSpec) -> tuple[list[TrainingProgram], list[Task]]:
    """Deterministically generate (training corpus, arriving task stream)."""
    schema = spec.schema
    rng_c = substream(spec.seed, STREAM_CORPUS)
    programs = []
    for i in range(spec.corpus_size):
        family = _draw_family(rng_c, spec.family_mix)
        feats = _draw_features(rng_c, schema, family, spec.spread)
        x_full = _loguniform(rng_c, *spec.input_size_range)
        req = float(rng_c.uniform(*spec.requirement_range))
        func = _draw_function(rng_c, family, x_full, req)
        sizes = np.geomspace(max(0.05, 0.05 * x_full), x_full, spec.curve_points)
        noise = spec.noise_level * rng_c.standard_normal(len(sizes))
        curve = tuple(
            (float(s), max(0.01, func.evaluate(float(s)) * (1.0 + float(e))))
            for s, e in zip(sizes, noise)
        )
        programs.append(
            TrainingProgram(
                name=f"train{i:02d}",
                checksum=checksum_of(f"{spec.seed}:corpus:{i}"),
                features=feats,
                curve=curve,
                function=func,
            )
        )

    rng_t = substream(spec.seed, STREAM_TASKS)
    rng_a = substream(spec.seed, STREAM_ARRIVALS)
    arrivals = np.cumsum(rng_a.exponential(spec.arrival_spacing_s, spec.task_count))
    tasks = []
    for i in range(spec.task_count):
        family = _draw_family(rng_t, spec.family_mix)
        feats = _draw_features(rng_t, schema, family, spec.spread)
        x_full = _loguniform(rng_t, *spec.input_size_range)
        req = float(rng_t.uniform(*spec.requirement_range))
        func = _draw_function(rng_t, family, x_full, req)
        cpu = float(rng_t.uniform(*spec.cpu_load_range))
        base = float(rng_t.uniform(*spec.base_runtime_range))
        tasks.append(
            Task(
                id=i,
                name=f"task{i:02d}",
                checksum=checksum_of(f"{spec.seed}:task:{i}"),
                arrival_time=float(arrivals[i]),
                input_size=x_full,
                ground_truth=func,
                cpu_load=cpu,
                base_runtime=base,
                latent_features=feats,
            )
        )
    return programs, tasks


# --- file round-trips used by the CLI -------------------------------------


def _function_to_dict(f: MemoryFunction) -> dict:
    return {"family": f.family, "m": f.m, "b": f.b}


def _function_from_dict(d: dict) -> MemoryFunction:
    return MemoryFunction(d["family"], d["m"], d["b"])


def spec_to_dict(spec: WorkloadSpec) -> dict:
    return {
        "seed": spec.seed,
        "task_count": spec.task_count,
        "corpus_size": spec.corpus_size,
        "family_mix": list(spec.family_mix),
        "input_size_range": list(spec.input_size_range),
        "requirement_range": list(spec.requirement_range),
        "cpu_load_range": list(spec.cpu_load_range),
        "base_runtime_range": list(spec.base_runtime_range),
        "arrival_spacing_s": spec.arrival_spacing_s,
        "spread": spec.spread,
        "noise_level": spec.noise_level,
        "schema_names": list(spec.schema_names),
        "curve_points": spec.curve_points,
    }


def spec_from_dict(d: dict) -> WorkloadSpec:
    kwargs = dict(d)
    for key in (
        "family_mix",
        "input_size_range",
        "requirement_range",
        "cpu_load_range",
        "base_runtime_range",
        "schema_names",
    ):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    return WorkloadSpec(**kwargs)


def save_corpus(programs: Sequence[TrainingProgram], path) -> None:
    schema_names = FeatureSchema.from_id(programs[0].features.schema_id).names
    data = {
        "schema": list(schema_names),
        "programs": [
            {
                "name": p.name,
                "checksum": p.checksum,
                "features": list(p.features.values),
                "curve": [[x, y] for x, y in p.curve],
                "function": _function_to_dict(p.function),
            }
            for p in programs
        ],
    }
    Path(path).write_text(json.dumps(data, indent=2) + "\n")


def load_corpus(path) -> list[TrainingProgram]:
    data = json.loads(Path(path).read_text())
    schema = FeatureSchema(tuple(data["schema"]))
    return [
        TrainingProgram(
            name=p["name"],
            checksum=p["checksum"],
            features=schema.vector(p["features"]),
            curve=tuple((float(x), float(y)) for x, y in p["curve"]),
            function=_function_from_dict(p["function"]),
        )
        for p in data["programs"]
    ]


def task_to_dict(t: Task) -> dict:
    return {
        "id": t.id,
        "name": t.name,
        "checksum": t.checksum,
        "arrival_time": t.arrival_time,
        "input_size": t.input_size,
        "ground_truth": _function_to_dict(t.ground_truth),
        "cpu_load": t.cpu_load,
        "base_runtime": t.base_runtime,
        "latent_features": list(t.latent_features.values),
    }


def task_from_dict(d: dict, schema: FeatureSchema) -> Task:
    return Task(
        id=int(d["id"]),
        name=d["name"],
        checksum=d["checksum"],
        arrival_time=float(d["arrival_time"]),
        input_size=float(d["input_size"]),
        ground_truth=_function_from_dict(d["ground_truth"]),
        cpu_load=float(d["cpu_load"]),
        base_runtime=float(d["base_runtime"]),
        latent_features=schema.vector(d["latent_features"]),
    )


def save_tasks(tasks: Sequence[Task], path) -> None:
    schema_names = FeatureSchema.from_id(tasks[0].latent_features.schema_id).names
    data = {"schema": list(schema_names), "tasks": [task_to_dict(t) for t in tasks]}
    Path(path).write_text(json.dumps(data, indent=2) + "\n")


def load_tasks(path) -> list[Task]:
    data = json.loads(Path(path).read_text())
    schema = FeatureSchema(tuple(data["schema"]))
    return [task_from_dict(d, schema) for d in data["tasks"]]
