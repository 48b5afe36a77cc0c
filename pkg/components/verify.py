"""End-to-end acceptance suite run by ``main.py verify``."""
import logging
import math
import time
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from components.bench import make_test_function, run_convergence
from components.cardinal import (
    SYMBOL_P,
    SYMBOL_P_INVERSE,
    SynthesisBudget,
    check_series_representation,
    convolution_inverse_residual,
    decay_fit,
    symbol_coefficients,
)
from components.interp import (
    BandlimitedFunction,
    build,
    eval_phi_form,
    evaluate,
    fourier_identity_residual,
    sample,
)
from components.kernel import (
    MultiquadricParams,
    PeriodizationConfig,
    cardinal_spectrum,
    poisson_spectrum_closed_form,
)
from components.multiplier import QuadratureConfig, mikhlin_stability, scaling_fit
from components.reports import ReportGenerator
from components.tables import TableCache
from utils.errors import CardinalError, ConfigError, ResourceBudgetError
from utils.format_helpers import format_multi_index
from utils.specfun import bessel_k, gamma

logger = logging.getLogger(__name__)

VERIFY_COLUMNS = ("id", "name", "measured", "threshold", "passed", "detail")
DETERMINISM_CRITERIA = (1, 2, 3, 5, 6, 7)

DELTA_CASES = ((0.5, 1), (2.5, 1), (-2.0, 1), (-2.5, 1), (0.5, 2), (-3.5, 2))
# (alpha, dim, p, family, smoothness order, required slope)
CONVERGENCE_EXPERIMENTS = (
    (0.5, 1, 2.0, "bspline", 3, 2.7),
    (2.5, 1, 2.0, "truncated_power", 2, 1.7),
    (-2.5, 1, 2.0, "bspline", 3, 2.7),
    (-1.0, 1, math.inf, "bspline", 2, 1.6),
    (-1.0, 1, 2.0, "bspline", 2, 1.7),
    (0.5, 2, 2.0, "truncated_power", 2, 1.5),
)


@dataclass
class CriterionResult:
    id: int
    name: str
    measured: float
    threshold: float
    passed: bool
    detail: str = ""
    runtime_ms: float = math.nan

    def row(self) -> Dict[str, Any]:
        return {"id": self.id, "name": self.name, "measured": self.measured,
                "threshold": self.threshold, "passed": "PASS" if self.passed else "FAIL",
                "detail": self.detail}


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b) / np.abs(b)))


class AcceptanceSuite:
    """Criteria 1-12; each returns one CriterionResult."""

    def __init__(self, settings: Dict[str, Any], cache: Optional[TableCache] = None, workers: int = 1):
        self.settings = settings
        self.cfg = PeriodizationConfig.from_config(settings)
        self.budget = SynthesisBudget.from_config(settings)
        self.cache = cache or TableCache(None, self.cfg, self.budget)
        self.workers = workers
        synthesis = settings.get("synthesis", {})
        self.accuracy = {1: float(synthesis.get("target_accuracy_1d", 1e-9)),
                         2: float(synthesis.get("target_accuracy_2d", 1e-7))}
        self.criteria: Dict[int, Callable[[], CriterionResult]] = {
            1: self.special_functions,
            2: self.poisson_closed_form,
            3: self.delta_property,
            4: self.spatial_decay,
            5: self.coefficient_decay,
            6: self.series_representation,
            7: self.space_equivalence,
            8: self.convergence_rates,
            9: self.multiplier_scaling,
            10: self.mikhlin_stability,
            11: self.fourier_identity,
            12: self.determinism,
        }
        self.determinism_criteria = tuple(int(i) for i in settings.get("verify", {}).get(
            "determinism_criteria", DETERMINISM_CRITERIA))
        if not self.determinism_criteria or any(i not in self.criteria or i == 12 for i in self.determinism_criteria):
            raise ConfigError(f"determinism_criteria must name criteria 1-11, got {list(self.determinism_criteria)}")

    def run(self, selected: Optional[Sequence[int]] = None) -> List[CriterionResult]:
        ids = sorted(set(selected)) if selected else sorted(self.criteria)
        unknown = [i for i in ids if i not in self.criteria]
        if unknown:
            raise ValueError(f"unknown criteria {unknown}")
        return [self.run_one(i) for i in ids]

    def run_one(self, criterion_id: int) -> CriterionResult:
        start = time.perf_counter()
        try:
            result = self.criteria[criterion_id]()
        except ResourceBudgetError:
            raise
        except CardinalError as e:
            logger.error(f"Criterion {criterion_id} raised: {str(e)}", exc_info=True)
            result = CriterionResult(criterion_id, self.criteria[criterion_id].__name__,
                                     math.nan, math.nan, False, f"error: {str(e)}")
        result.runtime_ms = (time.perf_counter() - start) * 1000.0
        logger.info(f"Criterion {result.id} ({result.name}): {'PASS' if result.passed else 'FAIL'} "
                    f"measured={result.measured:.4g} threshold={result.threshold:.4g}")
        return result

    @staticmethod
    def csv(results: Sequence[CriterionResult], config_echo: Optional[Dict[str, Any]] = None) -> str:
        return ReportGenerator.generate_csv_report([r.row() for r in results], VERIFY_COLUMNS, config_echo)

    def _table(self, alpha: float, dim: int, radius: float = 8.0, c: float = 1.0):
        return self.cache.get_or_synthesize(MultiquadricParams(alpha, c, dim), self.accuracy[dim], radius)

    def special_functions(self) -> CriterionResult:
        z = np.geomspace(0.1, 50.0, 200)
        base = np.sqrt(math.pi / (2.0 * z)) * np.exp(-z)
        closed = {0.5: base, 1.5: base * (1.0 + 1.0 / z), 2.5: base * (1.0 + 3.0 / z + 3.0 / z ** 2)}
        bessel = max(_rel(np.asarray(bessel_k(nu, z)), ref) for nu, ref in closed.items())

        recurrence = 0.0
        for nu in (0.3, 1.7, 4.2):
            lhs = np.asarray(bessel_k(nu + 1.0, z))
            rhs = np.asarray(bessel_k(nu - 1.0, z)) + 2.0 * nu / z * np.asarray(bessel_k(nu, z))
            recurrence = max(recurrence, _rel(rhs, lhs))

        xs = [0.1, 0.25, 0.3, 0.5, 0.7, 0.9, -0.4, -1.6, -2.3]
        reflection = max(abs(gamma(x) * gamma(1.0 - x) * math.sin(math.pi * x) / math.pi - 1.0) for x in xs)
        passed = bessel <= 1e-10 and recurrence <= 1e-9 and reflection <= 1e-12
        return CriterionResult(1, "special_functions", max(bessel, recurrence, reflection), 1e-10, passed,
                               f"bessel={bessel:.3e}; recurrence={recurrence:.3e}; reflection={reflection:.3e}")

    def poisson_closed_form(self) -> CriterionResult:
        n = 1000
        xi = -math.pi + (np.arange(n) + 0.5) * 2.0 * math.pi / n
        params = MultiquadricParams(-1.0, 1.0, 1)
        computed = np.asarray(cardinal_spectrum(params, xi, self.cfg))
        err = _rel(computed, poisson_spectrum_closed_form(xi))
        half = float(cardinal_spectrum(params, math.pi / 2.0, self.cfg))
        point = abs(half - (1.0 - math.exp(-math.pi))) / (1.0 - math.exp(-math.pi))
        return CriterionResult(2, "poisson_closed_form", max(err, point), 1e-10,
                               err <= 1e-10 and point <= 1e-10, f"grid={err:.3e}; pi/2={point:.3e}")

    def delta_property(self) -> CriterionResult:
        worst, parts = 0.0, []
        for alpha, dim in DELTA_CASES:
            residual = self._table(alpha, dim).integer_node_residual(5)
            worst = max(worst, residual)
            parts.append(f"({alpha},{dim})={residual:.2e}")
        return CriterionResult(3, "delta_property", worst, 1e-6, worst <= 1e-6, "; ".join(parts))

    def spatial_decay(self) -> CriterionResult:
        threshold = -2.0 + 0.3
        worst, parts, ok = -math.inf, [], True
        for alpha, dim in DELTA_CASES:
            if dim != 1:
                continue
            table = self._table(alpha, dim, radius=112.0)
            fit = decay_fit(table, 10.0, 100.0, floor=max(1e-12, 100.0 * table.accuracy_estimate))
            ok = ok and fit.passes(-2.0)
            worst = max(worst, math.inf if fit.below_floor else fit.slope)
            detail = f"below floor ({fit.n_points} points)" if fit.below_floor else f"{fit.slope:.2f}"
            parts.append(f"({alpha})={detail}")
        return CriterionResult(4, "spatial_decay", worst, threshold, ok, "; ".join(parts))

    def _coefficient_slope(self, alpha: float) -> float:
        radius = int(self.settings.get("coefficients", {}).get("index_radius", 64))
        coeffs = symbol_coefficients(MultiquadricParams(alpha, 1.0, 1), SYMBOL_P, radius, cfg=self.cfg)
        if not np.array_equal(coeffs.values, coeffs.values[::-1]):
            return math.inf
        slope, _ = coeffs.decay_slope()
        return slope

    def coefficient_decay(self) -> CriterionResult:
        s_half = self._coefficient_slope(-2.5)
        s_int = self._coefficient_slope(-2.0)
        passed = s_half <= -3.5 and s_int <= -1.5
        return CriterionResult(5, "coefficient_decay", s_half, -3.5, passed,
                               f"alpha=-2.5 slope={s_half:.3f}; alpha=-2 slope={s_int:.3f} (<= -1.5)")

    def series_representation(self) -> CriterionResult:
        params = MultiquadricParams(-2.5, 1.0, 1)
        table = self._table(-2.5, 1)
        coeffs = symbol_coefficients(params, SYMBOL_P, 64, cfg=self.cfg)
        check = check_series_representation(params, table, coeffs, np.linspace(-3.0, 3.0, 100))
        return CriterionResult(6, "series_representation", check.max_abs_residual, 1e-6,
                               check.max_abs_residual <= 1e-6, f"tail_bound={check.tail_bound:.3e}")

    def space_equivalence(self) -> CriterionResult:
        h, alpha = 0.25, -2.5
        tf = make_test_function("bspline", 3, 1, 1.0)
        samples = sample(tf, h, int(math.ceil(1.0 / h)) + 1, dim=1)
        xs = np.linspace(-1.5, 1.5, 100)
        interp = build(alpha, 1, h, samples, self.accuracy[1], eval_radius=1.5, cfg=self.cfg, cache=self.cache)
        dilated = MultiquadricParams(alpha, 1.0 / h, 1)
        a_seq = symbol_coefficients(dilated, SYMBOL_P, 64, cfg=self.cfg)
        d_seq = symbol_coefficients(dilated, SYMBOL_P_INVERSE, 64, cfg=self.cfg)
        cardinal_form = np.asarray(evaluate(interp, xs))
        phi_form = eval_phi_form(interp, a_seq, xs)
        scale = float(np.max(np.abs(samples.values)))
        gap = float(np.max(np.abs(cardinal_form - phi_form.values))) / scale
        inverse = convolution_inverse_residual(a_seq, d_seq)
        edge = convolution_inverse_residual(a_seq, d_seq, inner=a_seq.index_radius)
        return CriterionResult(7, "space_equivalence", max(gap, inverse), 1e-6, max(gap, inverse) <= 1e-6,
                               f"relative gap={gap:.3e}; convolution inverse={inverse:.3e} "
                               f"(|m| <= {a_seq.index_radius // 4}; {edge:.3e} up to the truncation edge); "
                               f"phi-form tail bound={phi_form.tail_bound:.3e}")

    def convergence_rates(self) -> CriterionResult:
        bench = self.settings.get("bench", {})
        h1 = bench.get("h_list_1d", [0.25, 0.125, 0.0625, 0.03125])
        h2 = bench.get("h_list_2d", [0.5, 0.25, 0.125])
        margin, parts, ok = math.inf, [], True
        for alpha, dim, p, family, k, required in CONVERGENCE_EXPERIMENTS:
            h_list = h1 if dim == 1 else h2
            tf = make_test_function(family, k, dim, 1.0, p=p)
            step = bench.get("grid_step_1d", 2.0 ** -8) if dim == 1 else bench.get("grid_step_2d", 2.0 ** -5)
            report = run_convergence(alpha, dim, p, tf, h_list, grid_step=step, accuracy=self.accuracy[dim],
                                     cache=self.cache, cfg=self.cfg, workers=self.workers)
            ok = ok and report.passes(required=required)
            margin = min(margin, report.fitted_slope - required)
            parts.append(f"alpha={alpha},d={dim},p={p},{tf.name}: slope={report.fitted_slope:.3f} (>= {required})")
        return CriterionResult(8, "convergence_rates", margin, 0.0, ok, "; ".join(parts))

    def multiplier_scaling(self) -> CriterionResult:
        h_list = self.settings.get("multiplier", {}).get("h_list", [0.25, 0.125, 0.0625, 0.03125])
        quad = QuadratureConfig.from_config(self.settings)
        quad_2d = QuadratureConfig(panel_base=0.1, order=6, shells=quad.shells, fd_step=quad.fd_step,
                                   richardson_tol=quad.richardson_tol)
        runs = [(0.5, 1, [(1,), (2,)], quad), (-2.5, 1, [(1,), (2,)], quad), (0.5, 2, [(1, 0)], quad_2d)]
        margin, parts, ok = math.inf, [], True
        for alpha, dim, gammas, q in runs:
            profile = scaling_fit(alpha, dim, h_list, gammas, q, self.cfg, workers=self.workers)
            for g, passed in profile.passes().items():
                ok = ok and passed
                margin = min(margin, profile.fitted_slopes[g] - (sum(g) - 0.3))
                parts.append(f"alpha={alpha},d={dim},gamma={format_multi_index(g)}: "
                             f"slope={profile.fitted_slopes[g]:.3f}; "
                             f"excluded={100.0 * profile.max_excluded_fraction(g):.2f}% (< 1%)")
        return CriterionResult(9, "multiplier_scaling", margin, 0.0, ok, "; ".join(parts))

    def mikhlin_stability(self) -> CriterionResult:
        h_list = self.settings.get("multiplier", {}).get("h_list", [0.25, 0.125, 0.0625, 0.03125])
        worst, parts = 0.0, []
        for dim in (1, 2):
            stats = mikhlin_stability(0.5, dim, h_list, QuadratureConfig.coarse(), self.cfg)
            for g, entry in stats.items():
                worst = max(worst, entry["ratio"])
                parts.append(f"d={dim},gamma={format_multi_index(g)}: ratio={entry['ratio']:.3g}")
        return CriterionResult(10, "mikhlin_stability", worst, 10.0, worst <= 10.0, "; ".join(parts))

    def fourier_identity(self) -> CriterionResult:
        worst, parts = 0.0, []
        for h in (0.25, 0.125):
            for f in (BandlimitedFunction(sigma=2.0, power=4), BandlimitedFunction(sigma=6.0, power=4)):
                residual = fourier_identity_residual(f, h, 0.5, cfg=self.cfg, cache=self.cache)
                worst = max(worst, residual)
                parts.append(f"h={h},sigma={f.sigma}: {residual:.2e}")
        return CriterionResult(11, "fourier_identity", worst, 1e-6, worst <= 1e-6, "; ".join(parts))

    def determinism(self) -> CriterionResult:
        first = self.csv([self.criteria[i]() for i in self.determinism_criteria])
        second = self.csv([self.criteria[i]() for i in self.determinism_criteria])
        same = ReportGenerator.csv_body(first) == ReportGenerator.csv_body(second)
        return CriterionResult(12, "determinism", 0.0 if same else 1.0, 0.0, same,
                               f"criteria {list(self.determinism_criteria)} rerun")
