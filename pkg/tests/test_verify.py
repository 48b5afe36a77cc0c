import copy

import pytest

from components.bench import make_test_function, run_convergence
from components.config import DEFAULT_CONFIG
from components.verify import CONVERGENCE_EXPERIMENTS, DETERMINISM_CRITERIA, AcceptanceSuite
from utils.errors import ConfigError


def _settings(**verify):
    settings = copy.deepcopy(DEFAULT_CONFIG)
    settings["verify"].update(verify)
    return settings


def test_default_determinism_covers_tables_and_coefficients():
    suite = AcceptanceSuite(_settings())
    assert suite.determinism_criteria == DETERMINISM_CRITERIA
    assert {3, 7} <= set(suite.determinism_criteria)


@pytest.mark.parametrize("criteria", [[], [12], [1, 99], [0]])
def test_determinism_criteria_are_validated(criteria):
    with pytest.raises(ConfigError):
        AcceptanceSuite(_settings(determinism_criteria=criteria))


def test_determinism_reruns_configured_subset():
    suite = AcceptanceSuite(_settings(determinism_criteria=[1, 2]))
    result = suite.determinism()
    assert result.passed
    assert "[1, 2]" in result.detail


@pytest.mark.slow
def test_space_equivalence_passes():
    result = AcceptanceSuite(_settings()).run_one(7)
    assert result.passed
    assert result.measured <= 1e-6


@pytest.mark.slow
@pytest.mark.parametrize("alpha,dim,p,family,k,required", CONVERGENCE_EXPERIMENTS)
def test_convergence_experiment(alpha, dim, p, family, k, required):
    bench = DEFAULT_CONFIG.get("bench", {})
    if dim == 1:
        h_list = bench.get("h_list_1d", [0.25, 0.125, 0.0625, 0.03125])
        step, accuracy = 2.0 ** -8, 1e-9
    else:
        h_list = bench.get("h_list_2d", [0.5, 0.25, 0.125])
        step, accuracy = 2.0 ** -5, 1e-7
    tf = make_test_function(family, k, dim, 1.0, p=p)
    report = run_convergence(alpha, dim, p, tf, h_list, grid_step=step, accuracy=accuracy, workers=2)
    assert report.passes(required=required)
