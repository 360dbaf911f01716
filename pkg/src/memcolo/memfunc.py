"""Parametric memory-function families and their fitting/calibration.

Three two-coefficient curve families map input size (GB) to memory
footprint (GB):

    power_law      y = m * x**b
    exponential    y = m * (1 - exp(-b * x))
    napierian_log  y = m + b * ln(x)

Training fits a family to many profiled points by least squares; at
runtime a family is instantiated from exactly two profiled points.
Everything here is pure and deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateInput, DomainError, InsufficientData, Unsolvable

POWER_LAW = "power_law"
EXPONENTIAL = "exponential"
NAPIERIAN_LOG = "napierian_log"

# Also the tie-break order for select_best_fit.
FAMILY_ORDER = (POWER_LAW, EXPONENTIAL, NAPIERIAN_LOG)

# Search bracket for the exponential shape coefficient b.
_B_LO = 1e-9
_B_HI = 1e4
_RATIO_TOL = 1e-12


@dataclass(frozen=True)
class MemoryFunction:
    family: str
    m: float
    b: float

    def __post_init__(self):
        object.__setattr__(self, "m", float(self.m))
        object.__setattr__(self, "b", float(self.b))
        if self.family not in FAMILY_ORDER:
            raise DomainError(f"unknown family {self.family!r}")
        if not (math.isfinite(self.m) and math.isfinite(self.b)):
            raise DomainError("coefficients must be finite")
        if self.family == POWER_LAW and self.m <= 0:
            raise DomainError("power_law requires m > 0")
        if self.family == EXPONENTIAL and (self.m <= 0 or self.b <= 0):
            raise DomainError("exponential requires m > 0 and b > 0")

    def evaluate(self, x: float) -> float:
        """Memory footprint in GB at input size ``x`` GB (x > 0)."""
        if x <= 0:
            raise DomainError(f"input size must be positive, got {x}")
        if self.family == POWER_LAW:
            return self.m * x**self.b
        if self.family == EXPONENTIAL:
            return self.m * -math.expm1(-self.b * x)
        return self.m + self.b * math.log(x)


@dataclass(frozen=True)
class FitReport:
    function: MemoryFunction
    rmse: float
    points_used: int

    def __post_init__(self):
        if self.rmse < 0:
            raise ValueError("rmse must be non-negative")


def _exp_point_ratio(b: float, x1: float, x2: float) -> float:
    # (1 - e^-bx1) / (1 - e^-bx2); the expm1 signs cancel.
    return math.expm1(-b * x1) / math.expm1(-b * x2)


def calibrate(family: str, p1: tuple[float, float], p2: tuple[float, float]) -> MemoryFunction:
    """Instantiate (m, b) from two profiled (input size, memory) points.

    power_law and napierian_log have closed forms; exponential is solved
    for b by bisection on the point ratio, which is strictly monotonic in
    b, then m follows in closed form.
    """
    if family not in FAMILY_ORDER:
        raise DomainError(f"unknown family {family!r}")
    (x1, y1), (x2, y2) = p1, p2
    if x1 <= 0 or x2 <= 0:
        raise DomainError("input sizes must be positive")
    if x1 == x2 or math.log(x1) == math.log(x2):
        raise DegenerateInput("calibration needs two distinct input sizes")

    if family == NAPIERIAN_LOG:
        b = (y1 - y2) / (math.log(x1) - math.log(x2))
        return MemoryFunction(NAPIERIAN_LOG, y1 - b * math.log(x1), b)

    if y1 <= 0 or y2 <= 0:
        raise DomainError(f"{family} requires positive memory observations")

    if family == POWER_LAW:
        b = math.log(y1 / y2) / math.log(x1 / x2)
        return MemoryFunction(POWER_LAW, y1 / x1**b, b)
    if x1 > x2:
        x1, x2, y1, y2 = x2, x1, y2, y1
    target = y1 / y2
    # Attainable ratios form the open interval (x1/x2, 1) over b > 0.
    if not x1 / x2 < target < 1.0:
        raise Unsolvable(
            f"point ratio {target:.6g} outside the attainable interval ({x1 / x2:.6g}, 1)"
        )
    lo, hi = _B_LO, _B_HI
    if not _exp_point_ratio(lo, x1, x2) < target < _exp_point_ratio(hi, x1, x2):
        raise Unsolvable("no shape coefficient in the search bracket matches the points")
    b = math.sqrt(lo * hi)
    for _ in range(200):
        r = _exp_point_ratio(b, x1, x2)
        if abs(r - target) <= _RATIO_TOL:
            break
        if r < target:
            lo = b
        else:
            hi = b
        nxt = math.sqrt(lo * hi)
        if nxt == b:
            break
        b = nxt
    return MemoryFunction(EXPONENTIAL, y1 / -math.expm1(-b * x1), b)


def _rmse(f: MemoryFunction, x: np.ndarray, y: np.ndarray) -> float:
    pred = np.array([f.evaluate(v) for v in x])
    return float(np.sqrt(np.mean((pred - y) ** 2)))


def _exp_sse(b: float, x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    # Closed-form amplitude for a candidate b, and the resulting SSE.
    g = -np.expm1(-b * x)
    m = float(y @ g) / float(g @ g)
    r = y - m * g
    return float(r @ r), m


def _fit_exponential(x: np.ndarray, y: np.ndarray) -> MemoryFunction:
    # Coarse log-grid scan to bracket the minimum, then golden-section.
    grid = np.geomspace(_B_LO, _B_HI, 160)
    sse = np.array([_exp_sse(b, x, y)[0] for b in grid])
    i = int(np.argmin(sse))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    c = hi - inv_phi * (hi - lo)
    d = lo + inv_phi * (hi - lo)
    fc, _ = _exp_sse(c, x, y)
    fd, _ = _exp_sse(d, x, y)
    for _ in range(200):
        if hi - lo <= 1e-12 * max(1.0, lo):
            break
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - inv_phi * (hi - lo)
            fc, _ = _exp_sse(c, x, y)
        else:
            lo, c, fc = c, d, fd
            d = lo + inv_phi * (hi - lo)
            fd, _ = _exp_sse(d, x, y)
    b = (lo + hi) / 2.0
    _, m = _exp_sse(b, x, y)
    if m <= 0 or b <= 0:
        raise Unsolvable("exponential fit needs positive amplitude")
    return MemoryFunction(EXPONENTIAL, m, b)


def _validate_points(points: Sequence[tuple[float, float]]) -> tuple[np.ndarray, np.ndarray]:
    pts = sorted((float(x), float(y)) for x, y in points)
    if len(pts) < 3:
        raise InsufficientData(f"need >= 3 points, got {len(pts)}")
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    if np.any(x <= 0):
        raise DomainError("input sizes must be positive")
    if x.min() == x.max():
        raise Unsolvable("all points share one input size")
    return x, y


def fit_least_squares(family: str, points: Sequence[tuple[float, float]]) -> FitReport:
    """Least-squares fit of one family to >= 3 (input size, memory) points.

    napierian_log and power_law are solved by linear regression in
    (log-)transformed coordinates; exponential by a 1-D search over b with
    m in closed form per candidate. The reported rmse is always on the
    original scale. Points are sorted internally, so the fit is invariant
    to input order.
    """
    x, y = _validate_points(points)

    if family == NAPIERIAN_LOG:
        b, m = np.polyfit(np.log(x), y, 1)
        f = MemoryFunction(NAPIERIAN_LOG, m, b)
    elif family == POWER_LAW:
        if np.any(y <= 0):
            raise Unsolvable("power_law cannot fit non-positive memory values")
        b, log_m = np.polyfit(np.log(x), np.log(y), 1)
        f = MemoryFunction(POWER_LAW, math.exp(log_m), b)
    elif family == EXPONENTIAL:
        f = _fit_exponential(x, y)
    else:
        raise DomainError(f"unknown family {family!r}")
    return FitReport(f, _rmse(f, x, y), len(x))


def select_best_fit(
    points: Sequence[tuple[float, float]],
) -> tuple[FitReport, tuple[FitReport, ...]]:
    """Fit every family and keep the lowest-rmse one.

    Ties break by family order (power_law < exponential < napierian_log).
    Raises Unsolvable only when no family at all can be fitted.
    """
    _validate_points(points)
    reports: list[tuple[int, FitReport]] = []
    failures: list[str] = []
    for rank, family in enumerate(FAMILY_ORDER):
        try:
            reports.append((rank, fit_least_squares(family, points)))
        except Unsolvable as exc:
            failures.append(f"{family}: {exc}")
    if not reports:
        raise Unsolvable("; ".join(failures))
    _, winner = min(reports, key=lambda t: (t[1].rmse, t[0]))
    return winner, tuple(r for _, r in reports)
