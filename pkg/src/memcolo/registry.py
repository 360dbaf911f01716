"""The trained-expert database.

A registry bundles the feature schema, the fitted scaling/PCA transforms,
and one record per known program: its checksum, raw and PC-space feature
vectors, and the memory function that best fits its profiled memory curve.
Expert selection is a 1-nearest-neighbour lookup in PC space with a
distance threshold; exact-binary reuse goes through the checksum index.

Registries are immutable: appending a newly learned record produces a new
value, so concurrent readers never see partial updates.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DuplicateProgram,
    EmptyRegistry,
    InsufficientData,
    ParseError,
    SchemaMismatch,
    Unsolvable,
    VersionError,
)
from .features import (
    MINMAX,
    FeatureSchema,
    FeatureVector,
    PcaModel,
    ScalingParams,
    fit_pca,
    fit_scaler,
    project,
    scale,
)
from .memfunc import MemoryFunction, select_best_fit

FORMAT_VERSION = 1
DEFAULT_KNN_THRESHOLD = 1.0
DEFAULT_VARIANCE_TARGET = 0.95

_CHECKSUM_RE = re.compile(r"^[0-9a-f]{32}$")


def validate_checksum(checksum: str) -> str:
    if not _CHECKSUM_RE.match(checksum):
        raise ValueError(f"checksum must be 32 lowercase hex chars, got {checksum!r}")
    return checksum


@dataclass(frozen=True)
class TrainingRecord:
    id: int
    name: str
    checksum: str
    raw_features: FeatureVector
    pc_features: FeatureVector
    function: MemoryFunction
    calibrated: bool = True
    cpu_load: float | None = None


@dataclass(frozen=True)
class CorpusEntry:
    """One training program: identity, profiled features, memory curve."""

    name: str
    checksum: str
    features: FeatureVector
    curve: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class SelectionResult:
    """Outcome of expert selection: a record, or too far from every one."""

    record: TrainingRecord | None
    distance: float

    @property
    def selected(self) -> bool:
        return self.record is not None


@dataclass(frozen=True)
class Registry:
    schema: FeatureSchema
    scaling: ScalingParams
    pca: PcaModel
    records: tuple[TrainingRecord, ...]
    knn_threshold: float = DEFAULT_KNN_THRESHOLD

    def __post_init__(self):
        if self.knn_threshold <= 0:
            raise ValueError("knn_threshold must be positive")
        object.__setattr__(self, "records", tuple(self.records))
        seen = set()
        for rec in self.records:
            if rec.checksum in seen:
                raise DuplicateProgram(f"checksum {rec.checksum} appears twice")
            seen.add(rec.checksum)
            if len(rec.pc_features) != self.pca.k:
                raise SchemaMismatch(
                    f"record {rec.name!r} has {len(rec.pc_features)} PC features, expected {self.pca.k}"
                )

    def transform(self, v: FeatureVector) -> FeatureVector:
        """Scale + project a raw feature vector into this registry's PC space."""
        return project(scale(v, self.scaling), self.pca)

    def next_id(self) -> int:
        return max((r.id for r in self.records), default=-1) + 1

    def with_record(self, record: TrainingRecord) -> "Registry":
        """Return a new registry with ``record`` appended.

        A record whose checksum is already present replaces the old one in
        place (keeping its id), which upgrades a family-only record to a
        calibrated one.
        """
        recs = list(self.records)
        for i, old in enumerate(recs):
            if old.checksum == record.checksum:
                recs[i] = replace(record, id=old.id)
                break
        else:
            recs.append(record)
        return replace(self, records=tuple(recs))


def train(
    corpus: Iterable,
    *,
    scaling_mode: str = MINMAX,
    variance_target: float = DEFAULT_VARIANCE_TARGET,
    knn_threshold: float = DEFAULT_KNN_THRESHOLD,
) -> Registry:
    """Build a registry from a training corpus.

    Each corpus entry needs ``name``, ``checksum``, ``features`` (a raw
    FeatureVector) and ``curve`` (>= 3 profiled (input size, memory)
    points); `CorpusEntry` works, as does any object with those attributes.
    Fits the scaler and PCA over all entries' features, then picks the
    best-fitting memory function per entry. Record ids follow input order.
    """
    entries = list(corpus)
    if len(entries) < 2:
        raise InsufficientData(f"need >= 2 training programs, got {len(entries)}")
    seen: set[str] = set()
    for e in entries:
        validate_checksum(e.checksum)
        if e.checksum in seen:
            raise DuplicateProgram(f"duplicate checksum {e.checksum} ({e.name})")
        seen.add(e.checksum)
        if len(e.curve) < 3:
            raise InsufficientData(f"{e.name}: need >= 3 curve points, got {len(e.curve)}")

    raw = [e.features for e in entries]
    scaling = fit_scaler(raw, scaling_mode)
    scaled = [scale(v, scaling) for v in raw]
    pca = fit_pca(scaled, variance_target)
    schema = FeatureSchema.from_id(entries[0].features.schema_id)

    records = []
    for i, e in enumerate(entries):
        try:
            winner, _ = select_best_fit(e.curve)
        except Unsolvable as exc:
            raise Unsolvable(f"{e.name}: {exc}") from exc
        records.append(
            TrainingRecord(
                id=i,
                name=e.name,
                checksum=e.checksum,
                raw_features=e.features,
                pc_features=project(scaled[i], pca),
                function=winner.function,
                calibrated=True,
            )
        )
    return Registry(schema, scaling, pca, tuple(records), knn_threshold)


def lookup_checksum(reg: Registry, checksum: str) -> TrainingRecord | None:
    for rec in reg.records:
        if rec.checksum == checksum:
            return rec
    return None


def nearest(reg: Registry, pc_features: FeatureVector) -> tuple[TrainingRecord, float]:
    """Minimal-Euclidean-distance record; ties go to the lowest id."""
    if not reg.records:
        raise EmptyRegistry("registry has no records")
    if len(pc_features) != reg.pca.k:
        raise SchemaMismatch(f"query has {len(pc_features)} dims, registry uses {reg.pca.k}")
    mat = np.array([r.pc_features.values for r in reg.records])
    dists = np.linalg.norm(mat - pc_features.as_array(), axis=1)
    ids = np.array([r.id for r in reg.records])
    i = int(np.lexsort((ids, dists))[0])
    return reg.records[i], float(dists[i])


def select_expert(reg: Registry, pc_features: FeatureVector) -> SelectionResult:
    """Nearest record if within the distance threshold (inclusive)."""
    rec, dist = nearest(reg, pc_features)
    if dist <= reg.knn_threshold:
        return SelectionResult(rec, dist)
    return SelectionResult(None, dist)


def leave_one_out_selection(
    corpus: Sequence, **train_kwargs
) -> list[tuple[str, str | None, float]]:
    """For each corpus entry: retrain without it, then query with its features.

    The scaler and PCA are refitted per fold. Returns one
    (name, selected family or None, nearest distance) triple per entry.
    """
    entries = list(corpus)
    out = []
    for i, held_out in enumerate(entries):
        reg = train(entries[:i] + entries[i + 1 :], **train_kwargs)
        sel = select_expert(reg, reg.transform(held_out.features))
        family = sel.record.function.family if sel.record is not None else None
        out.append((held_out.name, family, sel.distance))
    return out


def _function_to_dict(f: MemoryFunction) -> dict:
    return {"family": f.family, "m": f.m, "b": f.b}


def _record_to_dict(r: TrainingRecord) -> dict:
    return {
        "id": r.id,
        "name": r.name,
        "checksum_md5": r.checksum,
        "raw_features": list(r.raw_features.values),
        "pc_features": list(r.pc_features.values),
        "function": _function_to_dict(r.function),
        "calibrated": r.calibrated,
        "cpu_load": r.cpu_load,
    }


def to_dict(reg: Registry) -> dict:
    if reg.scaling.mode == MINMAX:
        stats = {"min": list(reg.scaling.a), "max": list(reg.scaling.b)}
    else:
        stats = {"mean": list(reg.scaling.a), "sd": list(reg.scaling.b)}
    return {
        "version": FORMAT_VERSION,
        "schema": list(reg.schema.names),
        "scaling": {"mode": reg.scaling.mode, "stats": stats},
        "pca": {
            "mean": list(reg.pca.mean),
            "components": [list(row) for row in reg.pca.components],
            "explained": list(reg.pca.explained),
        },
        "threshold": reg.knn_threshold,
        "records": [_record_to_dict(r) for r in reg.records],
    }


def save(reg: Registry, path) -> None:
    """Write the registry as JSON. Python's float repr keeps full precision."""
    Path(path).write_text(json.dumps(to_dict(reg), indent=2) + "\n")


def _field(obj: dict, key: str, ctx: str):
    try:
        return obj[key]
    except (KeyError, TypeError):
        raise ParseError(f"missing field '{key}' in {ctx}") from None


def from_dict(data: dict) -> Registry:
    version = _field(data, "version", "registry")
    if version != FORMAT_VERSION:
        raise VersionError(f"registry format version {version!r}, expected {FORMAT_VERSION}")
    try:
        schema = FeatureSchema(tuple(_field(data, "schema", "registry")))
        scaling_d = _field(data, "scaling", "registry")
        mode = _field(scaling_d, "mode", "scaling")
        stats = _field(scaling_d, "stats", "scaling")
        if mode == MINMAX:
            scaling = ScalingParams(
                mode, schema.schema_id, _field(stats, "min", "stats"), _field(stats, "max", "stats")
            )
        else:
            scaling = ScalingParams(
                mode, schema.schema_id, _field(stats, "mean", "stats"), _field(stats, "sd", "stats")
            )
        pca_d = _field(data, "pca", "registry")
        pca = PcaModel(
            schema.schema_id,
            tuple(_field(pca_d, "mean", "pca")),
            tuple(tuple(row) for row in _field(pca_d, "components", "pca")),
            tuple(_field(pca_d, "explained", "pca")),
        )
        records = []
        for rd in _field(data, "records", "registry"):
            fd = _field(rd, "function", "record")
            func = MemoryFunction(
                _field(fd, "family", "function"), _field(fd, "m", "function"), _field(fd, "b", "function")
            )
            checksum = validate_checksum(_field(rd, "checksum_md5", "record"))
            cpu = rd.get("cpu_load")
            records.append(
                TrainingRecord(
                    id=int(_field(rd, "id", "record")),
                    name=str(_field(rd, "name", "record")),
                    checksum=checksum,
                    raw_features=FeatureVector(
                        tuple(_field(rd, "raw_features", "record")), schema.schema_id
                    ),
                    pc_features=FeatureVector(
                        tuple(_field(rd, "pc_features", "record")), pca.pc_schema_id
                    ),
                    function=func,
                    calibrated=bool(rd.get("calibrated", True)),
                    cpu_load=None if cpu is None else float(cpu),
                )
            )
        return Registry(schema, scaling, pca, tuple(records), float(_field(data, "threshold", "registry")))
    except (ValueError, TypeError) as exc:
        raise ParseError(f"malformed registry: {exc}") from exc


def load(path) -> Registry:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ParseError("registry file must hold a JSON object")
    return from_dict(data)
