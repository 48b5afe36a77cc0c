"""Convergence experiments: finite-smoothness test functions, L_p errors over
shrinking h, estimated orders of convergence and report rows."""
import logging
import math
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import BSpline

from components.interp import build, default_accuracy, lp_error, sample
from components.kernel import PeriodizationConfig, as_points, restore_shape
from components.reports import CONVERGENCE_COLUMNS
from utils.data_processor import DataProcessor
from utils.errors import FitError, UnsupportedFamilyError

logger = logging.getLogger(__name__)

FAMILIES = ("bspline", "truncated_power", "gaussian_bump")
_ALIAS = re.compile(r"^(bspline|truncated_power|gaussian_bump)(?:_degree|_k)?(?:_(\d+))?$")

WINDOW_FACTOR = 1.5
DEFAULT_GRID_STEP = {1: 2.0 ** -8, 2: 2.0 ** -5}
SLOPE_MARGIN = 0.3
EOC_STABILITY = 0.4

loglog_slope = DataProcessor.loglog_slope


@dataclass(frozen=True, eq=False)
class TestFunction:
    """A compactly supported function with declared W_inf^k smoothness."""
    __test__ = False

    family: str
    smoothness_order: int
    dim: int
    support_radius: float
    evaluator: Callable[[np.ndarray], np.ndarray]
    spline: Optional[BSpline] = None
    scale: float = 1.0

    @property
    def name(self) -> str:
        return f"{self.family}_{self.smoothness_order}"

    def __call__(self, x) -> np.ndarray:
        pts, shape = as_points(x, self.dim)
        return restore_shape(np.asarray(self.evaluator(pts), dtype=float), shape)

    def seminorm(self, p: float) -> Optional[float]:
        """|f|_{W_p^k}, exact for 1-D B-splines (piecewise constant k-th derivative)."""
        if self.spline is None or self.dim != 1:
            return None
        knots = self.spline.t[self.spline.k:-self.spline.k] if self.spline.k else self.spline.t
        knots = np.unique(knots)
        mids = 0.5 * (knots[:-1] + knots[1:])
        widths = np.diff(knots)
        deriv = np.abs(self.spline.derivative(self.smoothness_order)(mids)) * self.scale
        if math.isinf(p):
            return float(np.max(deriv))
        return float(np.sum(widths * deriv ** p) ** (1.0 / p))


def _parse_family(family: str, order: Optional[int]) -> Tuple[str, int]:
    match = _ALIAS.match(family.strip().lower())
    if not match:
        raise UnsupportedFamilyError(f"unsupported test-function family '{family}'")
    base, suffix = match.group(1), match.group(2)
    if suffix is not None:
        if order is not None and int(order) != int(suffix):
            raise UnsupportedFamilyError(f"family '{family}' conflicts with order {order}")
        order = int(suffix)
    if order is None:
        raise UnsupportedFamilyError(f"family '{family}' needs an order")
    return base, int(order)


def make_test_function(family: str, order: Optional[int] = None, dim: int = 1,
                       support_radius: float = 1.0, p: Optional[float] = None) -> TestFunction:
    """Build a test function; accepts names such as 'bspline_degree_3' or 'truncated_power_2'."""
    base, order = _parse_family(family, order)
    if order < 1:
        raise UnsupportedFamilyError(f"order must be >= 1, got {order}")
    if dim not in (1, 2):
        raise UnsupportedFamilyError(f"test functions are provided for d in {{1, 2}}, got {dim}")
    if p is not None and not order > dim / p:
        raise UnsupportedFamilyError(f"order {order} must exceed d/p = {dim / p}")
    if support_radius <= 0:
        raise UnsupportedFamilyError(f"support radius must be positive, got {support_radius}")
    radius = float(support_radius)

    if base == "bspline":
        knots = np.linspace(-radius, radius, order + 2)
        spline = BSpline.basis_element(knots, extrapolate=False)
        scale = 1.0 / float(spline(0.0))

        def evaluator(pts: np.ndarray) -> np.ndarray:
            vals = np.nan_to_num(spline(pts), nan=0.0) * scale
            return np.prod(vals, axis=1)

        return TestFunction(base, order, dim, radius, evaluator, spline=spline, scale=scale)

    if base == "truncated_power":
        def evaluator(pts: np.ndarray) -> np.ndarray:
            t = 1.0 - np.sum(pts ** 2, axis=1) / radius ** 2
            return np.where(t > 0.0, np.maximum(t, 0.0) ** order, 0.0)

        return TestFunction(base, order, dim, radius, evaluator)

    def evaluator(pts: np.ndarray) -> np.ndarray:
        r2 = np.sum(pts ** 2, axis=1) / radius ** 2
        inside = r2 < 1.0
        out = np.zeros(len(pts))
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
        return out

    return TestFunction(base, order, dim, radius, evaluator)


@dataclass(frozen=True)
class ConvergenceRow:
    h: float
    error: float
    runtime_ms: float


@dataclass
class ConvergenceReport:
    alpha: float
    dim: int
    p: float
    family: str
    k: int
    rows: List[ConvergenceRow]
    eoc_pairs: List[Tuple[float, float, float]] = field(default_factory=list)
    fitted_slope: float = math.nan
    fit_residual: float = math.nan

    @property
    def errors(self) -> List[float]:
        return [r.error for r in self.rows]

    @property
    def h_values(self) -> List[float]:
        return [r.h for r in self.rows]

    def passes(self, margin: float = SLOPE_MARGIN, required: Optional[float] = None) -> bool:
        """One-sided gate: fitted slope >= k - margin, or >= ``required`` when given."""
        threshold = required if required is not None else self.k - margin
        return bool(np.isfinite(self.fitted_slope) and self.fitted_slope >= threshold)

    def monotone(self) -> bool:
        increases, large = DataProcessor.count_inversions(self.errors, tolerance=0.05)
        return increases <= 1 and large == 0

    def eoc_stable(self) -> bool:
        if not self.eoc_pairs:
            return False
        return abs(self.eoc_pairs[-1][2] - self.fitted_slope) <= EOC_STABILITY

    def csv_rows(self, include_runtime: bool = True) -> List[Dict[str, Any]]:
        eocs = [math.nan] + [pair[2] for pair in self.eoc_pairs]
        rows = []
        for row, eoc in zip(self.rows, eocs):
            record = {"alpha": self.alpha, "dim": self.dim, "p": self.p, "family": self.family,
                      "k": self.k, "h": row.h, "error": row.error, "eoc": eoc,
                      "runtime_ms": row.runtime_ms if include_runtime else math.nan}
            rows.append({c: record[c] for c in CONVERGENCE_COLUMNS})
        return rows

    def to_dict(self) -> Dict[str, Any]:
        return {
            "alpha": self.alpha,
            "dim": self.dim,
            "p": self.p,
            "test_function": f"{self.family}_{self.k}",
            "rows": [{"h": r.h, "error": r.error, "runtime_ms": r.runtime_ms} for r in self.rows],
            "eoc_pairs": [{"h_coarse": a, "h_fine": b, "eoc": e} for a, b, e in self.eoc_pairs],
            "fitted_slope": self.fitted_slope,
            "fit_residual": self.fit_residual,
            "passes": self.passes(),
            "monotone": self.monotone(),
            "eoc_stable": self.eoc_stable(),
        }


def holder_consistency(u: Callable, v: Callable, p: float, window, grid_step: float,
                       dim: int = 1) -> Tuple[float, float, bool]:
    """L_1 error against |W|^{1-1/p} times the L_p error on the same quadrature."""
    l1 = lp_error(u, v, 1.0, window, grid_step, dim)
    lp = lp_error(u, v, p, window, grid_step, dim)
    if isinstance(window, (int, float)):
        measure = (2.0 * float(window)) ** dim
    else:
        measure = float(np.prod([hi - lo for lo, hi in window]))
    exponent = 1.0 if math.isinf(p) else 1.0 - 1.0 / p
    bound = measure ** exponent * lp
    return l1, bound, l1 <= bound * (1.0 + 1e-12) + 1e-300


def refinement_change(u: Callable, v: Callable, p: float, window, grid_step: float, dim: int = 1) -> float:
    """Relative change of lp_error when grid_step is halved."""
    coarse = lp_error(u, v, p, window, grid_step, dim)
    fine = lp_error(u, v, p, window, grid_step / 2.0, dim)
    if coarse == 0.0:
        return 0.0 if fine == 0.0 else math.inf
    return abs(fine - coarse) / coarse


def run_convergence(alpha: float, dim: int, p: float, tf: TestFunction, h_list: Sequence[float],
                    window: Optional[float] = None, grid_step: Optional[float] = None,
                    accuracy: Optional[float] = None, cache=None,
                    cfg: Optional[PeriodizationConfig] = None, workers: int = 1) -> ConvergenceReport:
    """Interpolate ``tf`` at every h and fit the L_p error against h on log-log axes."""
    h_list = [float(h) for h in h_list]
    if len(h_list) < 3:
        raise FitError(f"a convergence run needs at least 3 values of h, got {len(h_list)}")
    if any(b >= a for a, b in zip(h_list[:-1], h_list[1:])):
        raise ValueError(f"h_list must be strictly decreasing, got {h_list}")
    if tf.dim != dim:
        raise ValueError(f"test function has d={tf.dim}, experiment has d={dim}")
    if not tf.smoothness_order > dim / p:
        raise UnsupportedFamilyError(f"order {tf.smoothness_order} must exceed d/p = {dim / p}")
    window = window if window is not None else WINDOW_FACTOR * tf.support_radius
    if window < tf.support_radius:
        raise ValueError(f"window {window} does not contain the support radius {tf.support_radius}")
    grid_step = grid_step if grid_step is not None else DEFAULT_GRID_STEP.get(dim, 2.0 ** -5)
    accuracy = accuracy if accuracy is not None else default_accuracy(dim)

    def run_one(h: float) -> ConvergenceRow:
        start = time.perf_counter()
        n = int(math.ceil(tf.support_radius / h)) + 1
        samples = sample(tf, h, n, dim=dim)
        interp = build(alpha, dim, h, samples, accuracy, eval_radius=window, cfg=cfg, cache=cache)
        error = lp_error(interp, tf, p, window, grid_step, dim)
        runtime_ms = (time.perf_counter() - start) * 1000.0
        logger.info(f"Convergence row alpha={alpha}, d={dim}, p={p}, {tf.name}: "
                    f"h={h:.6g}, error={error:.6e}, {runtime_ms:.0f} ms")
        return ConvergenceRow(h=h, error=error, runtime_ms=runtime_ms)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        rows = list(executor.map(run_one, h_list))

    errors = [r.error for r in rows]
    report = ConvergenceReport(alpha=alpha, dim=dim, p=p, family=tf.family, k=tf.smoothness_order,
                               rows=rows, eoc_pairs=DataProcessor.eoc_pairs(h_list, errors))
    try:
        report.fitted_slope, report.fit_residual = loglog_slope(zip(h_list, errors))
    except FitError as e:
        logger.warning(f"No convergence order for {tf.name}: {str(e)}")
    logger.info(f"Fitted slope {report.fitted_slope:.3f} for alpha={alpha}, d={dim}, p={p}, {tf.name}")
    return report
