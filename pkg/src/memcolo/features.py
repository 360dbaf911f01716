"""Feature vectors, scaling to a canonical range, and PCA reduction.

Transforms are fitted once on a training corpus and are immutable
afterwards, so they can be shared freely by expert selection, the runtime
predictor and the simulator. Two scaling modes are supported (min-max to
[0, 1] and z-score normalisation); dimensionality reduction keeps the
smallest number of principal components that reaches a configured
explained-variance target.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InsufficientData, SchemaMismatch

MINMAX = "minmax"
ZSCORE = "zscore"
SCALING_MODES = (MINMAX, ZSCORE)

# Relative cutoff below which a variance direction counts as zero.
_VAR_EPS = 1e-12


@dataclass(frozen=True)
class FeatureSchema:
    """Named, ordered feature columns. The id encodes names and order."""

    names: tuple[str, ...]

    def __post_init__(self):
        names = tuple(str(n) for n in self.names)
        if not names:
            raise ValueError("schema needs at least one feature")
        if any("," in n or not n for n in names):
            raise ValueError("feature names must be non-empty and comma-free")
        if len(set(names)) != len(names):
            raise ValueError("duplicate feature names")
        object.__setattr__(self, "names", names)

    @property
    def dim(self) -> int:
        return len(self.names)

    @property
    def schema_id(self) -> str:
        return ",".join(self.names)

    @classmethod
    def from_id(cls, schema_id: str) -> "FeatureSchema":
        return cls(tuple(schema_id.split(",")))

    def vector(self, values: Sequence[float]) -> "FeatureVector":
        vals = tuple(float(v) for v in values)
        if len(vals) != self.dim:
            raise SchemaMismatch(
                f"expected {self.dim} values for schema '{self.schema_id}', got {len(vals)}"
            )
        return FeatureVector(vals, self.schema_id)


@dataclass(frozen=True)
class FeatureVector:
    """Ordered real-valued features plus the id of the schema they follow."""

    values: tuple[float, ...]
    schema_id: str

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ValueError("feature vector must not be empty")
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("feature values must be finite")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


@dataclass(frozen=True)
class ScalingParams:
    """Per-feature statistics for one scaling mode.

    For min-max, ``a`` holds the per-feature minima and ``b`` the maxima;
    for z-score, ``a`` holds the means and ``b`` the population standard
    deviations. Stored natively so the fitted statistics round-trip exactly.
    """

    mode: str
    schema_id: str
    a: tuple[float, ...]
    b: tuple[float, ...]

    def __post_init__(self):
        if self.mode not in SCALING_MODES:
            raise ValueError(f"unknown scaling mode {self.mode!r}")
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        object.__setattr__(self, "b", tuple(float(v) for v in self.b))
        if len(self.a) != len(self.b):
            raise ValueError("statistic arrays must have equal length")

    @property
    def dim(self) -> int:
        return len(self.a)

    @property
    def mins(self) -> tuple[float, ...]:
        assert self.mode == MINMAX
        return self.a

    @property
    def maxs(self) -> tuple[float, ...]:
        assert self.mode == MINMAX
        return self.b

    @property
    def means(self) -> tuple[float, ...]:
        assert self.mode == ZSCORE
        return self.a

    @property
    def sds(self) -> tuple[float, ...]:
        assert self.mode == ZSCORE
        return self.b

    @property
    def degenerate_mask(self) -> tuple[bool, ...]:
        """Features with zero range (min-max) or zero deviation (z-score).

        These map to 0 when scaled; a flat counter on a small corpus is
        legitimate, so this is a flag, not an error.
        """
        if self.mode == MINMAX:
            return tuple(hi == lo for lo, hi in zip(self.a, self.b))
        return tuple(sd == 0.0 for sd in self.b)


def fit_scaler(samples: Sequence[FeatureVector], mode: str = MINMAX) -> ScalingParams:
    """Fit per-feature scaling statistics over a training sample set.

    Requires at least two samples sharing one schema. Min-max records the
    exact per-feature minima/maxima; z-score records means and population
    (divide-by-n) standard deviations.
    """
    if mode not in SCALING_MODES:
        raise ValueError(f"unknown scaling mode {mode!r}")
    samples = list(samples)
    if len(samples) < 2:
        raise InsufficientData(f"need >= 2 samples to fit a scaler, got {len(samples)}")
    schema_id = samples[0].schema_id
    if any(s.schema_id != schema_id for s in samples):
        raise SchemaMismatch("samples mix feature schemas")
    x = np.array([s.values for s in samples], dtype=float)
    if mode == MINMAX:
        params = ScalingParams(MINMAX, schema_id, x.min(axis=0), x.max(axis=0))
    else:
        params = ScalingParams(ZSCORE, schema_id, x.mean(axis=0), x.std(axis=0))
    if any(params.degenerate_mask):
        warnings.warn("constant feature(s) will scale to 0", RuntimeWarning, stacklevel=2)
    return params


def scale(v: FeatureVector, p: ScalingParams) -> FeatureVector:
    """Apply fitted scaling to one vector.

    Min-max maps every training-set value into [0, 1]; new values may land
    outside and are kept as-is (no clipping). Zero-range features map to 0.
    """
    if v.schema_id != p.schema_id or len(v) != p.dim:
        raise SchemaMismatch(f"vector schema '{v.schema_id}' != params schema '{p.schema_id}'")
    x = v.as_array()
    a = np.asarray(p.a)
    b = np.asarray(p.b)
    denom = (b - a) if p.mode == MINMAX else b
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(denom != 0.0, (x - a) / denom, 0.0)
    return FeatureVector(tuple(out), v.schema_id)


@dataclass(frozen=True)
class PcaModel:
    """Centering vector plus k orthonormal principal directions.

    ``explained`` holds each retained component's fraction of the total
    sample variance (population convention), in non-increasing order.
    """

    schema_id: str
    mean: tuple[float, ...]
    components: tuple[tuple[float, ...], ...]
    explained: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "mean", tuple(float(v) for v in self.mean))
        object.__setattr__(
            self, "components", tuple(tuple(float(v) for v in row) for row in self.components)
        )
        object.__setattr__(self, "explained", tuple(float(v) for v in self.explained))
        if len(self.components) != len(self.explained):
            raise ValueError("one explained-variance fraction per component")
        if any(len(row) != len(self.mean) for row in self.components):
            raise ValueError("component dimension must match the mean vector")

    @property
    def k(self) -> int:
        return len(self.components)

    @property
    def dim(self) -> int:
        return len(self.mean)

    @property
    def pc_schema_id(self) -> str:
        return f"pc{self.k}"

    def component_matrix(self) -> np.ndarray:
        return np.asarray(self.components, dtype=float).reshape(self.k, self.dim)


def fit_pca(samples: Sequence[FeatureVector], variance_target: float = 0.95) -> PcaModel:
    """Fit PCA by SVD of the centered sample matrix.

    Keeps the smallest component count whose cumulative explained variance
    reaches ``variance_target``. Zero-variance directions are dropped, so
    rank-deficient inputs are fine. Sign convention: the largest-magnitude
    entry of each component is made positive, which keeps outputs
    deterministic.
    """
    if not 0.0 < variance_target <= 1.0:
        raise ValueError("variance_target must be in (0, 1]")
    samples = list(samples)
    if len(samples) < 2:
        raise InsufficientData(f"need >= 2 samples to fit PCA, got {len(samples)}")
    schema_id = samples[0].schema_id
    if any(s.schema_id != schema_id for s in samples):
        raise SchemaMismatch("samples mix feature schemas")
    x = np.array([s.values for s in samples], dtype=float)
    n = x.shape[0]
    mean = x.mean(axis=0)
    _, s, vt = np.linalg.svd(x - mean, full_matrices=False)
    var = s * s / n
    total = float(var.sum())
    if total <= 0.0:
        raise InsufficientData("all samples identical; no variance to model")
    frac = var / total
    keep = var > total * _VAR_EPS
    frac, vt = frac[keep], vt[keep]
    cum = np.cumsum(frac)
    k = int(np.searchsorted(cum, variance_target - 1e-12, side="left")) + 1
    k = min(k, len(frac))
    comps = vt[:k].copy()
    for row in comps:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaModel(schema_id, tuple(mean), tuple(map(tuple, comps)), tuple(frac[:k]))


def project(v: FeatureVector, m: PcaModel) -> FeatureVector:
    """Project a vector onto the retained components: C @ (v - mean)."""
    if v.schema_id != m.schema_id or len(v) != m.dim:
        raise SchemaMismatch(f"vector schema '{v.schema_id}' != model schema '{m.schema_id}'")
    out = m.component_matrix() @ (v.as_array() - np.asarray(m.mean))
    return FeatureVector(tuple(out), m.pc_schema_id)
