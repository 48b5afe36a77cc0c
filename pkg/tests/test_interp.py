import math

import numpy as np
import pytest
from scipy import integrate

from components.bench import make_test_function
from components.cardinal import SYMBOL_P, symbol_coefficients
from components.interp import (
    BandlimitedFunction,
    LatticeSamples,
    build,
    eval_phi_form,
    evaluate,
    fourier_identity_residual,
    lp_error,
    sample,
)
from components.kernel import MultiquadricParams
from utils.errors import ParameterRangeError, TableRangeError

H = 0.25


@pytest.fixture(scope="module")
def spline_samples():
    tf = make_test_function("bspline", 3, 1, 1.0)
    return tf, sample(tf, H, 5, dim=1)


@pytest.fixture(scope="module")
def interpolant(spline_samples):
    _, samples = spline_samples
    return build(0.5, 1, H, samples, accuracy=1e-8, eval_radius=2.0)


def test_sample_layout():
    samples = sample(lambda pts: pts[:, 0] + 10.0 * pts[:, 1], 0.5, ((-1, 1), (0, 2)))
    assert samples.values.shape == (3, 3)
    assert samples.values[0, 0] == pytest.approx(-0.5)
    assert samples.values[2, 2] == pytest.approx(10.5)
    assert samples.box_radius == 2
    np.testing.assert_allclose(samples.nodes()[0], [-0.5, 0.0])


def test_lattice_samples_validation():
    with pytest.raises(ValueError):
        LatticeSamples(0.5, 1, ((-1, 1),), np.zeros(4))
    with pytest.raises(ValueError):
        LatticeSamples(0.5, 1, ((-1, 1),), np.array([0.0, np.nan, 1.0]))


def test_interpolates_the_data(interpolant, spline_samples):
    _, samples = spline_samples
    values = np.asarray(evaluate(interpolant, samples.nodes()))
    np.testing.assert_allclose(values, samples.values.ravel(), atol=1e-6)


def test_linear_in_the_data(spline_samples):
    tf, samples = spline_samples
    doubled = samples + samples
    x = np.linspace(-1.2, 1.2, 17)
    first = build(0.5, 1, H, samples, accuracy=1e-8, eval_radius=2.0)
    second = build(0.5, 1, H, doubled, accuracy=1e-8, eval_radius=2.0)
    np.testing.assert_allclose(evaluate(second, x), 2.0 * np.asarray(evaluate(first, x)), rtol=1e-12, atol=1e-15)


def test_shift_invariance(interpolant, spline_samples):
    _, samples = spline_samples
    moved = build(0.5, 1, H, samples.shifted(0, 2), accuracy=1e-8, eval_radius=2.5)
    x = np.linspace(-1.0, 1.0, 9)
    np.testing.assert_allclose(evaluate(moved, x + 2 * H), evaluate(interpolant, x), atol=1e-7)


def test_callable_interpolant(interpolant):
    assert interpolant(0.1) == evaluate(interpolant, 0.1)


def test_evaluation_outside_table(interpolant):
    assert interpolant.truncation_radius == int(interpolant.table.spatial_radius)
    with pytest.raises(TableRangeError):
        evaluate(interpolant, 60.0)


def test_zero_data_gives_zero():
    zero = sample(lambda pts: np.zeros(len(pts)), H, 3, dim=1)
    interp = build(0.5, 1, H, zero, accuracy=1e-8, eval_radius=1.0)
    np.testing.assert_array_equal(evaluate(interp, np.linspace(-1.0, 1.0, 5)), 0.0)


@pytest.mark.parametrize("alpha,dim", [(-1.2, 1), (-1.0, 2), (0.25, 1)])
def test_build_rejects_parameters_outside_range(alpha, dim):
    samples = sample(lambda pts: np.ones(len(pts)), H, 2, dim=dim)
    with pytest.raises(ParameterRangeError):
        build(alpha, dim, H, samples)


def test_lp_error_quadrature():
    u = lambda pts: pts[:, 0]
    v = lambda pts: np.zeros(len(pts))
    assert lp_error(u, v, 2.0, 1.0, 2.0 ** -8) == pytest.approx(math.sqrt(2.0 / 3.0), rel=1e-4)
    assert lp_error(u, v, math.inf, 1.0, 2.0 ** -8) == 1.0
    assert lp_error(u, v, 1.0, 1.0, 2.0 ** -8) == pytest.approx(1.0, rel=1e-12)
    area = lp_error(lambda p: np.ones(len(p)), v, 1.0, 1.0, 2.0 ** -4, dim=2)
    assert area == pytest.approx(4.0, rel=1e-12)


def test_lp_error_refinement_is_stable():
    u = lambda pts: np.exp(-pts[:, 0] ** 2)
    v = lambda pts: np.zeros(len(pts))
    coarse = lp_error(u, v, 2.0, 1.5, 2.0 ** -7)
    fine = lp_error(u, v, 2.0, 1.5, 2.0 ** -8)
    assert abs(fine - coarse) <= 0.01 * coarse


def test_lp_error_rejects_bad_arguments():
    u = lambda pts: pts[:, 0]
    with pytest.raises(ValueError):
        lp_error(u, u, 2.0, 1.0, 0.3)
    with pytest.raises(ValueError):
        lp_error(u, u, 0.5, 1.0, 0.25)


def test_bandlimited_transform_is_normalized():
    f = BandlimitedFunction(sigma=4.0, power=4, amplitude=2.0)
    xi = np.linspace(-5.0, 5.0, 20001)
    integral = integrate.trapezoid(f.fourier(xi), xi) / (2.0 * math.pi)
    assert integral == pytest.approx(f(0.0), rel=1e-6)
    assert f(0.0) == pytest.approx(2.0)
    np.testing.assert_array_equal(f.fourier(np.array([4.01, -4.5])), 0.0)


@pytest.mark.slow
def test_phi_form_agrees_with_cardinal_form(spline_samples):
    _, samples = spline_samples
    interp = build(-2.5, 1, H, samples, accuracy=1e-9, eval_radius=1.5)
    coeffs = symbol_coefficients(MultiquadricParams(-2.5, 1.0 / H, 1), SYMBOL_P, 64)
    x = np.linspace(-1.5, 1.5, 100)
    result = eval_phi_form(interp, coeffs, x)
    scale = float(np.max(np.abs(samples.values)))
    assert np.max(np.abs(result.values - np.asarray(evaluate(interp, x)))) <= 1e-6 * scale
    assert result.tail_bound >= 0.0


def test_phi_form_checks_parameters(interpolant):
    coeffs = symbol_coefficients(MultiquadricParams(-2.5, 1.0, 1), SYMBOL_P, 8, check_aliasing=False)
    with pytest.raises(ParameterRangeError):
        eval_phi_form(interpolant, coeffs, [0.0])


@pytest.mark.slow
@pytest.mark.parametrize("h", [0.25, 0.125])
def test_fourier_identity(h):
    f = BandlimitedFunction(sigma=2.0, power=4)
    assert fourier_identity_residual(f, h, 0.5) <= 1e-6


def test_fourier_identity_rejects_out_of_band():
    with pytest.raises(ParameterRangeError):
        fourier_identity_residual(BandlimitedFunction(sigma=20.0), 0.25, 0.5)
