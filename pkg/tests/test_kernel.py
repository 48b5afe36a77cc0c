import math

import numpy as np
import pytest

from components.kernel import (
    MultiquadricParams,
    PeriodizationConfig,
    cardinal_spectrum,
    global_sign,
    lattice_shell,
    log_abs_phi_hat,
    periodic_symbol_P,
    phi_eval,
    poisson_s_closed_form,
    poisson_spectrum_closed_form,
    s_sum,
)
from utils.errors import DomainError, ParameterRangeError

POISSON = MultiquadricParams(-1.0, 1.0, 1)
OFFSET_GRID = -math.pi + (np.arange(1000) + 0.5) * 2.0 * math.pi / 1000


@pytest.mark.parametrize("alpha", [0.0, 1.0, 3.0])
def test_nonnegative_integer_alpha_rejected(alpha):
    with pytest.raises(ParameterRangeError):
        MultiquadricParams(alpha, 1.0, 1)


@pytest.mark.parametrize("c", [0.0, -1.0, math.inf])
def test_shape_parameter_must_be_positive(c):
    with pytest.raises(ParameterRangeError):
        MultiquadricParams(0.5, c, 1)


def test_range_flags():
    assert MultiquadricParams(-2.5, 1.0, 1).decaying_range
    assert not MultiquadricParams(-1.5, 1.0, 1).decaying_range
    assert MultiquadricParams(0.5, 1.0, 2).theorem_range
    assert not MultiquadricParams(-1.0, 1.0, 2).theorem_range
    assert POISSON.is_poisson and not POISSON.theorem_range
    assert MultiquadricParams(0.5, 1.0, 3).nu == 2.0


def test_periodization_config_validation():
    with pytest.raises(ParameterRangeError):
        PeriodizationConfig(tail_log_tol=-10.0)
    cfg = PeriodizationConfig.from_config({"periodization": {"tail_log_tol": -40, "max_shell": 8}})
    assert cfg.tail_log_tol == -40.0 and cfg.max_shell == 8


def test_phi_eval():
    params = MultiquadricParams(0.5, 2.0, 2)
    x = np.array([[0.0, 0.0], [3.0, 0.0], [1.0, 1.0]])
    np.testing.assert_allclose(phi_eval(params, x), [2.0, math.sqrt(13.0), math.sqrt(6.0)])
    assert phi_eval(MultiquadricParams(-1.0, 1.0, 1), 1.0) == pytest.approx(0.5)


def test_poisson_transform_is_exponential():
    r = np.array([0.1, 1.0, 4.0, 30.0])
    for c in (0.5, 1.0, 3.0):
        params = MultiquadricParams(-1.0, c, 1)
        expected = 0.5 * math.log(math.pi / 2.0) - math.log(c) - c * r
        np.testing.assert_allclose(log_abs_phi_hat(params, r), expected, rtol=1e-12, atol=1e-12)


def test_transform_sign_follows_gamma():
    assert global_sign(MultiquadricParams(0.5, 1.0, 1)) == -1
    assert global_sign(MultiquadricParams(1.5, 1.0, 1)) == 1
    assert global_sign(MultiquadricParams(-2.5, 1.0, 1)) == 1


def test_log_abs_phi_hat_rejects_origin():
    with pytest.raises(DomainError):
        log_abs_phi_hat(MultiquadricParams(0.5, 1.0, 1), np.array([0.0, 1.0]))


def test_lattice_shell_counts():
    for dim in (1, 2, 3):
        for k in (1, 2, 5):
            shell = lattice_shell(dim, k)
            assert len(shell) == (2 * k + 1) ** dim - (2 * k - 1) ** dim
            assert np.all(np.max(np.abs(shell), axis=1) == k)
    assert lattice_shell(2, 0).tolist() == [[0, 0]]


def test_poisson_s_sum_matches_geometric_series():
    np.testing.assert_allclose(s_sum(POISSON, OFFSET_GRID), poisson_s_closed_form(OFFSET_GRID), rtol=1e-10)


def test_s_sum_outside_cell_rejected():
    with pytest.raises(DomainError):
        s_sum(POISSON, 3.5)


def test_poisson_spectrum_matches_closed_form_everywhere():
    xi = np.linspace(-3.0 * math.pi + 0.01, 3.0 * math.pi - 0.01, 801)
    np.testing.assert_allclose(cardinal_spectrum(POISSON, xi), poisson_spectrum_closed_form(xi), rtol=1e-10)


def test_poisson_spectrum_at_quarter_period():
    assert cardinal_spectrum(POISSON, math.pi / 2.0) == pytest.approx(1.0 - math.exp(-math.pi), rel=1e-12)


@pytest.mark.parametrize("alpha", [0.5, 2.5, -2.5])
def test_spectrum_partitions_unity(alpha):
    params = MultiquadricParams(alpha, 1.0, 1)
    xi = np.array([0.3, 1.1, 2.9])
    total = sum(np.asarray(cardinal_spectrum(params, xi + 2.0 * math.pi * j)) for j in range(-8, 9))
    np.testing.assert_allclose(total, 1.0, rtol=1e-12)


def test_spectrum_interpolates_at_lattice_points():
    params = MultiquadricParams(0.5, 1.0, 1)
    assert cardinal_spectrum(params, 0.0) == 1.0
    np.testing.assert_array_equal(cardinal_spectrum(params, 2.0 * math.pi * np.array([1.0, -2.0])), 0.0)


def test_spectrum_is_symmetric_in_two_dimensions():
    params = MultiquadricParams(0.5, 1.0, 2)
    pts = np.array([[0.4, 1.7], [2.0, -0.3], [5.0, 1.0]])
    np.testing.assert_allclose(cardinal_spectrum(params, pts), cardinal_spectrum(params, pts[:, ::-1]),
                               rtol=1e-13)
    np.testing.assert_allclose(cardinal_spectrum(params, pts), cardinal_spectrum(params, -pts), rtol=1e-13)


def test_periodic_symbol_is_periodic_and_positive():
    params = MultiquadricParams(-2.5, 1.0, 1)
    xi = np.linspace(-3.0, 3.0, 13)
    values = periodic_symbol_P(params, xi)
    assert np.all(values > 0)
    np.testing.assert_allclose(periodic_symbol_P(params, xi + 2.0 * math.pi), values, rtol=1e-12)


def test_periodic_symbol_needs_decaying_range():
    with pytest.raises(ParameterRangeError):
        periodic_symbol_P(MultiquadricParams(0.5, 1.0, 1), 0.1)
