import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memcolo.errors import DegenerateInput, DomainError, InsufficientData, Unsolvable
from memcolo.memfunc import (
    EXPONENTIAL,
    FAMILY_ORDER,
    NAPIERIAN_LOG,
    POWER_LAW,
    MemoryFunction,
    calibrate,
    fit_least_squares,
    select_best_fit,
)

SORT = MemoryFunction(EXPONENTIAL, 5.768, 4.479)
PAGERANK = MemoryFunction(NAPIERIAN_LOG, 16.333, 1.79)


# --- evaluation ---------------------------------------------------------------


def test_evaluate_log_at_one_returns_offset():
    assert PAGERANK.evaluate(1.0) == 16.333


def test_evaluate_exponential_direct_arithmetic():
    expect = 5.768 * (1.0 - math.exp(-4.479 * 1.0))
    assert SORT.evaluate(1.0) == pytest.approx(expect, rel=1e-12)


def test_evaluate_power_linear_special_case():
    assert MemoryFunction(POWER_LAW, 2.0, 1.0).evaluate(3.0) == pytest.approx(6.0)


def test_evaluate_rejects_nonpositive_input():
    for f in (SORT, PAGERANK, MemoryFunction(POWER_LAW, 1.0, 0.5)):
        with pytest.raises(DomainError):
            f.evaluate(0.0)
        with pytest.raises(DomainError):
            f.evaluate(-1.0)


def test_coefficient_invariants():
    with pytest.raises(DomainError):
        MemoryFunction(POWER_LAW, -1.0, 0.5)
    with pytest.raises(DomainError):
        MemoryFunction(EXPONENTIAL, 2.0, -0.5)
    with pytest.raises(DomainError):
        MemoryFunction(EXPONENTIAL, 0.0, 0.5)
    MemoryFunction(NAPIERIAN_LOG, -5.0, 0.0)  # log family is unconstrained


# --- two-point calibration -----------------------------------------------------


def test_calibrate_log_from_pagerank_points():
    # Forward-evaluate the published curve at x=1 and x=e, then invert.
    p1 = (1.0, PAGERANK.evaluate(1.0))
    p2 = (math.e, PAGERANK.evaluate(math.e))
    assert p2[1] == pytest.approx(18.123, abs=1e-12)
    f = calibrate(NAPIERIAN_LOG, p1, p2)
    assert f.m == pytest.approx(16.333, rel=1e-12)
    assert f.b == pytest.approx(1.79, rel=1e-12)


def test_calibrate_power_through_doubling_points():
    f = calibrate(POWER_LAW, (1.0, 2.0), (2.0, 4.0))
    assert f.m == pytest.approx(2.0, rel=1e-12)
    assert f.b == pytest.approx(1.0, rel=1e-12)


def test_calibrate_exponential_recovers_sort_curve():
    p1 = (0.1, SORT.evaluate(0.1))
    p2 = (0.5, SORT.evaluate(0.5))
    f = calibrate(EXPONENTIAL, p1, p2)
    assert f.m == pytest.approx(5.768, rel=1e-4)
    assert f.b == pytest.approx(4.479, rel=1e-4)


def test_calibrate_rejects_equal_sizes():
    with pytest.raises(DegenerateInput):
        calibrate(POWER_LAW, (2.0, 1.0), (2.0, 3.0))


def test_calibrate_exponential_unattainable_ratio():
    # An increasing exponential cannot pass through decreasing points.
    with pytest.raises(Unsolvable):
        calibrate(EXPONENTIAL, (1.0, 4.0), (2.0, 3.0))
    # Nor a ratio steeper than linear-through-origin (y1/y2 < x1/x2).
    with pytest.raises(Unsolvable):
        calibrate(EXPONENTIAL, (1.0, 1.0), (2.0, 10.0))


def test_calibrate_requires_positive_memory_where_needed():
    with pytest.raises(DomainError):
        calibrate(POWER_LAW, (1.0, -2.0), (2.0, 4.0))
    with pytest.raises(DomainError):
        calibrate(EXPONENTIAL, (1.0, 0.0), (2.0, 4.0))
    calibrate(NAPIERIAN_LOG, (1.0, -2.0), (2.0, 4.0))  # fine for the log family


# --- least squares ---------------------------------------------------------------


def test_fit_log_noiseless_recovers_pagerank():
    pts = [(x, PAGERANK.evaluate(x)) for x in (1.0, 2.0, 4.0, 8.0)]
    rep = fit_least_squares(NAPIERIAN_LOG, pts)
    assert rep.function.m == pytest.approx(16.333, rel=1e-9)
    assert rep.function.b == pytest.approx(1.79, rel=1e-9)
    assert rep.rmse <= 1e-9
    assert rep.points_used == 4


def test_fit_power_noiseless():
    truth = MemoryFunction(POWER_LAW, 3.0, 0.5)
    pts = [(x, truth.evaluate(x)) for x in (1.0, 4.0, 9.0, 16.0)]
    rep = fit_least_squares(POWER_LAW, pts)
    assert rep.function.m == pytest.approx(3.0, rel=1e-9)
    assert rep.function.b == pytest.approx(0.5, rel=1e-9)
    assert rep.rmse == pytest.approx(0.0, abs=1e-10)


def test_fit_constant_memory_with_log_family():
    rep = fit_least_squares(NAPIERIAN_LOG, [(1.0, 4.25), (3.0, 4.25), (9.0, 4.25)])
    assert rep.function.b == pytest.approx(0.0, abs=1e-12)
    assert rep.function.m == pytest.approx(4.25, rel=1e-12)


def test_fit_rejects_bad_inputs():
    with pytest.raises(InsufficientData):
        fit_least_squares(POWER_LAW, [(1.0, 1.0), (2.0, 2.0)])
    with pytest.raises(DomainError):
        fit_least_squares(POWER_LAW, [(-1.0, 1.0), (2.0, 2.0), (3.0, 3.0)])
    with pytest.raises(Unsolvable):
        fit_least_squares(NAPIERIAN_LOG, [(2.0, 1.0), (2.0, 2.0), (2.0, 3.0)])


# --- best-fit selection ------------------------------------------------------------


def test_select_best_fit_prefers_exponential_for_sort_data():
    pts = [(x, SORT.evaluate(x)) for x in (0.1, 0.2, 0.4, 0.8, 1.6)]
    winner, reports = select_best_fit(pts)
    assert winner.function.family == EXPONENTIAL
    assert len(reports) == len(FAMILY_ORDER)
    assert winner.rmse == min(r.rmse for r in reports)


def test_select_best_fit_prefers_log_for_pagerank_data():
    pts = [(x, PAGERANK.evaluate(x)) for x in (1.0, 2.0, 4.0, 8.0, 16.0)]
    winner, _ = select_best_fit(pts)
    assert winner.function.family == NAPIERIAN_LOG


def test_select_best_fit_linear_points_tie_break_to_power():
    winner, _ = select_best_fit([(1.0, 2.0), (2.0, 4.0), (3.0, 6.0)])
    assert winner.function.family == POWER_LAW
    assert winner.rmse <= 1e-8


def test_select_best_fit_propagates_only_when_everything_fails():
    # Negative memory defeats power/exponential but not the log family.
    pts = [(1.0, -1.0), (2.0, -0.5), (4.0, 0.2)]
    winner, reports = select_best_fit(pts)
    assert winner.function.family == NAPIERIAN_LOG
    assert len(reports) == 1


# --- properties ----------------------------------------------------------------------


def _valid_function(family, m, b):
    if family == POWER_LAW:
        return MemoryFunction(POWER_LAW, abs(m) + 0.1, 0.1 + abs(b) % 1.5)
    if family == EXPONENTIAL:
        return MemoryFunction(EXPONENTIAL, abs(m) + 0.1, 0.05 + abs(b) % 2.0)
    return MemoryFunction(NAPIERIAN_LOG, m, 0.1 + abs(b) % 3.0)


families = st.sampled_from(FAMILY_ORDER)
coeff = st.floats(min_value=-20, max_value=40, allow_nan=False)


@given(families, coeff, coeff, st.floats(0.1, 8.0), st.floats(1.5, 10.0))
@settings(max_examples=150)
def test_calibration_round_trip(family, m, b, x1, scale_up):
    f = _valid_function(family, m, b)
    x2 = x1 * scale_up
    y1, y2 = f.evaluate(x1), f.evaluate(x2)
    if family != NAPIERIAN_LOG and (y1 <= 0 or y2 <= 0):
        return
    got = calibrate(family, (x1, y1), (x2, y2))
    tol = 1e-4 if family == EXPONENTIAL else 1e-6
    assert got.m == pytest.approx(f.m, rel=tol, abs=tol)
    assert got.b == pytest.approx(f.b, rel=tol, abs=tol)


@given(families, coeff, coeff, st.floats(0.05, 50.0), st.floats(1.01, 4.0))
@settings(max_examples=150)
def test_evaluate_strictly_increasing(family, m, b, x, step):
    f = _valid_function(family, m, b)
    if family == EXPONENTIAL and f.b * x * step > 30.0:
        return  # saturated beyond float64 resolution; the increase is unobservable
    assert f.evaluate(x * step) > f.evaluate(x)


@given(families, coeff, coeff)
@settings(max_examples=60)
def test_noiseless_fit_recovers_coefficients(family, m, b):
    f = _valid_function(family, m, b)
    pts = [(x, f.evaluate(x)) for x in (0.25, 0.5, 1.0, 2.0, 4.0, 8.0)]
    if family != NAPIERIAN_LOG and any(y <= 0 for _, y in pts):
        return
    rep = fit_least_squares(family, pts)
    assert rep.rmse <= 1e-8 * max(1.0, max(abs(y) for _, y in pts))
    assert rep.function.m == pytest.approx(f.m, rel=1e-6, abs=1e-6)
    assert rep.function.b == pytest.approx(f.b, rel=1e-6, abs=1e-6)


@given(st.permutations(list(range(6))))
@settings(max_examples=30)
def test_select_best_fit_permutation_invariant(order):
    xs = (0.25, 0.5, 1.0, 2.0, 4.0, 8.0)
    pts = [(x, SORT.evaluate(x) + 0.03 * i) for i, x in enumerate(xs)]
    base_winner, base_reports = select_best_fit(pts)
    shuffled = [pts[i] for i in order]
    winner, reports = select_best_fit(shuffled)
    assert winner == base_winner
    assert reports == base_reports
