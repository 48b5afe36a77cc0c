import math

import numpy as np
import pytest

from components.bench import (
    ConvergenceReport,
    ConvergenceRow,
    TestFunction,
    holder_consistency,
    loglog_slope,
    make_test_function,
    refinement_change,
    run_convergence,
)
from components.reports import CONVERGENCE_COLUMNS
from utils.data_processor import DataProcessor
from utils.errors import FitError, UnsupportedFamilyError


@pytest.mark.parametrize("name,order,family,k", [
    ("bspline_degree_3", None, "bspline", 3),
    ("bspline", 2, "bspline", 2),
    ("truncated_power_2", None, "truncated_power", 2),
    ("truncated_power_k_4", 4, "truncated_power", 4),
    ("Gaussian_Bump", 5, "gaussian_bump", 5),
])
def test_family_aliases(name, order, family, k):
    tf = make_test_function(name, order)
    assert tf.family == family
    assert tf.smoothness_order == k
    assert tf.name == f"{family}_{k}"


@pytest.mark.parametrize("family", ["bspline", "truncated_power", "gaussian_bump"])
@pytest.mark.parametrize("dim", [1, 2])
def test_peak_and_support(family, dim):
    tf = make_test_function(family, 3, dim, support_radius=1.0)
    assert tf(np.zeros((1, dim)))[0] == pytest.approx(1.0, rel=1e-12)
    outside = np.full((4, dim), 1.0)
    outside[:, 0] = [1.0, 1.25, -1.5, 3.0]
    np.testing.assert_array_equal(tf(outside), np.zeros(4))


def test_truncated_power_value():
    tf = make_test_function("truncated_power", 2, 1, support_radius=1.0)
    assert float(tf(0.5)) == pytest.approx(0.5625, rel=1e-14)
    tf2 = make_test_function("truncated_power", 2, 2, support_radius=2.0)
    assert float(tf2(np.array([1.0, 1.0]))) == pytest.approx(0.25, rel=1e-14)


def test_bspline_is_even_and_nonnegative():
    tf = make_test_function("bspline", 3, 1)
    x = np.linspace(-1.2, 1.2, 97)
    vals = tf(x)
    np.testing.assert_allclose(vals, vals[::-1], atol=1e-15)
    assert np.all(vals >= 0.0)


def test_hat_seminorm():
    hat = make_test_function("bspline", 1, 1)
    assert hat.seminorm(2.0) == pytest.approx(math.sqrt(2.0), rel=1e-12)
    assert hat.seminorm(math.inf) == pytest.approx(1.0, rel=1e-12)
    assert make_test_function("truncated_power", 2).seminorm(2.0) is None


@pytest.mark.parametrize("kwargs", [
    {"family": "hermite", "order": 2},
    {"family": "bspline"},
    {"family": "bspline", "order": 0},
    {"family": "bspline", "order": 2, "dim": 3},
    {"family": "bspline_degree_3", "order": 2},
    {"family": "truncated_power", "order": 2, "support_radius": 0.0},
    {"family": "bspline", "order": 1, "dim": 2, "p": 2.0},
])
def test_unsupported_test_functions(kwargs):
    with pytest.raises(UnsupportedFamilyError):
        make_test_function(**kwargs)


def test_test_function_is_not_collected():
    assert TestFunction.__test__ is False


def test_loglog_slope_exact_power():
    xs = [0.5, 0.25, 0.125, 0.0625]
    slope, residual = loglog_slope((x, x ** 2) for x in xs)
    assert slope == pytest.approx(2.0, abs=1e-12)
    assert residual == pytest.approx(0.0, abs=1e-12)
    scaled, _ = loglog_slope((x, 37.0 * x ** 3) for x in xs)
    assert scaled == pytest.approx(3.0, abs=1e-12)


@pytest.mark.parametrize("points", [
    [(1.0, 1.0), (2.0, 4.0)],
    [(1.0, 1.0), (2.0, 0.0), (4.0, 16.0)],
    [(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)],
])
def test_loglog_slope_rejects(points):
    with pytest.raises(FitError):
        loglog_slope(points)


def test_eoc_pairs():
    pairs = DataProcessor.eoc_pairs([0.5, 0.25, 0.125], [1.0, 0.125, 0.0])
    assert pairs[0][:2] == (0.5, 0.25)
    assert pairs[0][2] == pytest.approx(3.0)
    assert math.isnan(pairs[1][2])


def _report(errors):
    h = [0.25, 0.125, 0.0625, 0.03125]
    rows = [ConvergenceRow(hv, e, 10.0) for hv, e in zip(h, errors)]
    report = ConvergenceReport(0.5, 1, 2.0, "bspline", 3, rows, DataProcessor.eoc_pairs(h, errors))
    report.fitted_slope, report.fit_residual = loglog_slope(zip(h, errors))
    return report


def test_report_gates():
    report = _report([1e-2, 1.25e-3, 1.5625e-4, 1.953125e-5])
    assert report.fitted_slope == pytest.approx(3.0)
    assert report.passes()
    assert not report.passes(required=3.5)
    assert report.monotone()
    assert report.eoc_stable()

    stalled = _report([1e-2, 2e-3, 2.1e-3, 2.2e-3])
    assert not stalled.passes()
    assert not stalled.monotone()


def test_csv_rows_column_order():
    report = _report([1e-2, 1.25e-3, 1.5625e-4, 1.953125e-5])
    rows = report.csv_rows()
    assert [tuple(r) for r in rows] == [CONVERGENCE_COLUMNS] * 4
    assert math.isnan(rows[0]["eoc"])
    assert rows[1]["eoc"] == pytest.approx(3.0)
    assert rows[2]["runtime_ms"] == 10.0
    assert all(math.isnan(r["runtime_ms"]) for r in report.csv_rows(include_runtime=False))
    assert report.to_dict()["test_function"] == "bspline_3"


def test_holder_consistency():
    u = lambda pts: np.sin(3.0 * pts[:, 0])
    v = lambda pts: np.zeros(len(pts))
    l1, bound, ok = holder_consistency(u, v, 2.0, 1.5, 2.0 ** -6)
    assert ok
    assert 0.0 < l1 <= bound
    _, _, ok_inf = holder_consistency(u, v, math.inf, 1.5, 2.0 ** -6)
    assert ok_inf


def test_refinement_change_is_small_for_smooth_error():
    u = lambda pts: np.exp(-pts[:, 0] ** 2)
    v = lambda pts: np.zeros(len(pts))
    assert refinement_change(u, v, 2.0, 1.5, 2.0 ** -6) < 1e-3
    assert refinement_change(v, v, 2.0, 1.5, 2.0 ** -6) == 0.0


@pytest.mark.parametrize("h_list,exc", [
    ([0.25, 0.125], FitError),
    ([0.25, 0.125, 0.125], ValueError),
    ([0.125, 0.25, 0.5], ValueError),
])
def test_run_convergence_validates_h(h_list, exc):
    tf = make_test_function("bspline", 3)
    with pytest.raises(exc):
        run_convergence(0.5, 1, 2.0, tf, h_list)


def test_run_convergence_validates_setup():
    tf = make_test_function("bspline", 3)
    with pytest.raises(ValueError):
        run_convergence(0.5, 2, 2.0, tf, [0.5, 0.25, 0.125])
    with pytest.raises(ValueError):
        run_convergence(0.5, 1, 2.0, tf, [0.5, 0.25, 0.125], window=0.5)


def test_exact_data_leaves_slope_undefined():
    zero = TestFunction("bspline", 3, 1, 1.0, lambda pts: np.zeros(len(pts)))
    report = run_convergence(0.5, 1, 2.0, zero, [0.5, 0.25, 0.125], grid_step=2.0 ** -4, accuracy=1e-6)
    assert report.errors == [0.0, 0.0, 0.0]
    assert math.isnan(report.fitted_slope)
    assert not report.passes()


@pytest.mark.slow
def test_cubic_bspline_rate():
    tf = make_test_function("bspline_degree_3", p=2.0)
    report = run_convergence(0.5, 1, 2.0, tf, [0.25, 0.125, 0.0625, 0.03125], workers=2)
    assert all(e > 0.0 for e in report.errors)
    assert report.fitted_slope >= 2.7
