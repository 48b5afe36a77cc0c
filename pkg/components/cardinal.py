"""Cardinal function synthesis, off-grid evaluation and coefficient sequences.

Tables are synthesized by a separable cosine transform of the cardinal
spectrum sampled on an offset midpoint grid of the positive orthant. The
spatial step is 1/q for an integer q, so every integer lattice point is a
table node and the delta property can be read off the samples directly.
"""
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy import fft as sp_fft
from scipy import signal
from scipy.interpolate import CubicSpline, RectBivariateSpline, RegularGridInterpolator

from components.kernel import (
    DEFAULT_PERIODIZATION,
    TWO_PI,
    MultiquadricParams,
    PeriodizationConfig,
    as_points,
    cardinal_spectrum,
    periodic_symbol_P,
    phi_eval,
    restore_shape,
)
from utils.data_processor import DataProcessor
from utils.errors import ParameterRangeError, ResourceBudgetError, TableRangeError
from utils.specfun import EPS

logger = logging.getLogger(__name__)

SYMBOL_P = "symbol_P"
SYMBOL_P_INVERSE = "symbol_P_inverse"
COEFFICIENT_KINDS = (SYMBOL_P, SYMBOL_P_INVERSE)

MIN_TARGET_ACCURACY = 1e-12
ALIASING_TOLERANCE = 1e-10
# Mirrored nodes kept below zero so the splines see the even extension.
_SPLINE_GHOSTS = 3
# Above this many (output x input) entries the cosine transform goes through the DCT.
_MATRIX_TRANSFORM_LIMIT = 4_000_000


@dataclass(frozen=True)
class SynthesisBudget:
    max_spectral_points: int = 4_000_000
    max_table_points: int = 20_000_000
    max_refinements: int = 12

    @classmethod
    def from_config(cls, config: Optional[Dict[str, Any]]) -> "SynthesisBudget":
        section = (config or {}).get("synthesis", {})
        return cls(max_spectral_points=int(section.get("max_spectral_points", 4_000_000)),
                   max_table_points=int(section.get("max_table_points", 20_000_000)),
                   max_refinements=int(section.get("max_refinements", 12)))


@dataclass(frozen=True)
class SynthesisGrid:
    """Discretization of one synthesis attempt."""
    cells: int          # spectrum kept over |xi|_inf <= (2 cells + 1) pi
    half_period: int    # alias half-period M in space; Fourier step pi / M
    per_unit: int       # table nodes per unit length q

    @property
    def fourier_step(self) -> float:
        return math.pi / self.half_period

    @property
    def fourier_cutoff(self) -> float:
        return (2 * self.cells + 1) * math.pi

    @property
    def spectral_points(self) -> int:
        return (2 * self.cells + 1) * self.half_period


@dataclass(frozen=True, eq=False)
class CardinalTable:
    params: MultiquadricParams
    spatial_step: float
    spatial_radius: float
    samples: np.ndarray
    fourier_cutoff: float
    alias_period: float
    accuracy_estimate: float
    target_accuracy: float = math.nan
    error_parts: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.samples.setflags(write=False)

    @property
    def nodes_per_unit(self) -> int:
        return int(round(1.0 / self.spatial_step))

    @property
    def half_count(self) -> int:
        return (self.samples.shape[0] + 1) // 2

    @property
    def orthant(self) -> np.ndarray:
        """Samples at x = n * spatial_step, n >= 0 in every coordinate."""
        start = self.half_count - 1
        return self.samples[(slice(start, None),) * self.params.dim]

    @property
    def max_coordinate(self) -> float:
        return (self.half_count - 1) * self.spatial_step

    @cached_property
    def _interpolator(self):
        start = self.half_count - 1 - _SPLINE_GHOSTS
        values = self.samples[(slice(start, None),) * self.params.dim]
        axis = (np.arange(values.shape[0]) - _SPLINE_GHOSTS) * self.spatial_step
        if self.params.dim == 1:
            spline = CubicSpline(axis, values)
            return lambda a: spline(a[:, 0])
        if self.params.dim == 2:
            spline = RectBivariateSpline(axis, axis, values, kx=3, ky=3, s=0)
            return lambda a: spline.ev(a[:, 0], a[:, 1])
        grid = RegularGridInterpolator((axis,) * self.params.dim, values, method="cubic")
        return lambda a: grid(a)

    def interpolate(self, a: np.ndarray) -> np.ndarray:
        """Spline value at nonnegative coordinates ``a`` of shape (n, d)."""
        return np.asarray(self._interpolator(a), dtype=float)

    def integer_node_residual(self, k_max: Optional[int] = None) -> float:
        """max |L(k) - delta_{0,k}| over integer k with |k|_inf <= k_max."""
        q = self.nodes_per_unit
        limit = int(math.floor(self.spatial_radius)) if k_max is None else int(k_max)
        limit = min(limit, (self.half_count - 1) // q)
        nodes = self.orthant[(slice(0, limit * q + 1, q),) * self.params.dim].copy()
        nodes[(0,) * self.params.dim] -= 1.0
        return float(np.max(np.abs(nodes)))

    def metadata(self) -> Dict[str, Any]:
        return {
            "params": self.params.to_dict(),
            "spatial_step": self.spatial_step,
            "spatial_radius": self.spatial_radius,
            "fourier_cutoff": self.fourier_cutoff,
            "alias_period": self.alias_period,
            "accuracy_estimate": self.accuracy_estimate,
            "target_accuracy": self.target_accuracy,
            "shape": list(self.samples.shape),
            "error_parts": dict(self.error_parts),
        }


@dataclass(frozen=True, eq=False)
class CoefficientSequence:
    kind: str
    index_radius: int
    values: np.ndarray
    dim: int
    params: MultiquadricParams
    dft_size: int
    aliasing_change: float = math.nan

    def __post_init__(self):
        self.values.setflags(write=False)

    def at(self, j) -> float:
        idx = np.broadcast_to(np.asarray(j, dtype=int), (self.dim,)) + self.index_radius
        return float(self.values[tuple(idx)])

    def indices(self) -> np.ndarray:
        axis = np.arange(-self.index_radius, self.index_radius + 1)
        grids = np.meshgrid(*([axis] * self.dim), indexing="ij")
        return np.stack(grids, axis=-1).reshape(-1, self.dim)

    def series_weights(self) -> np.ndarray:
        """Coefficients rescaled for the printed transform constant."""
        exponent = -0.5 if self.kind == SYMBOL_P else 0.5
        return self.values * TWO_PI ** (exponent * self.dim)

    def l1_norm(self) -> float:
        return DataProcessor.compensated_sum(np.abs(self.values).ravel())

    def last_shell_fraction(self) -> float:
        mags = np.abs(self.values)
        inner = mags[(slice(1, -1),) * self.dim].sum() if self.index_radius > 0 else 0.0
        total = mags.sum()
        return float((total - inner) / total) if total > 0 else 0.0

    def magnitude_profile(self) -> Tuple[np.ndarray, np.ndarray]:
        """(|j|, |a_j|) along the first axis, j = 1..N."""
        center = (self.index_radius,) * self.dim
        line = self.values[(slice(self.index_radius + 1, None),) + center[1:]]
        return np.arange(1, self.index_radius + 1, dtype=float), np.abs(line)

    def decay_slope(self, j_min: int = 8, rel_floor: float = 1e-14) -> Tuple[float, float]:
        """Log-log slope and residual of the outer envelope of |a_j| for j >= j_min."""
        js, mags = self.magnitude_profile()
        envelope = DataProcessor.outer_envelope(mags)
        keep = (js >= j_min) & (envelope > rel_floor * np.max(np.abs(self.values)))
        return DataProcessor.loglog_slope(zip(js[keep], envelope[keep]))


@dataclass(frozen=True)
class SeriesCheck:
    max_abs_residual: float
    tail_bound: float
    n_points: int


@dataclass(frozen=True)
class DecayFit:
    slope: float
    residual: float
    n_points: int
    below_floor: bool = False

    def passes(self, exponent: float, margin: float = 0.3, allow_below_floor: bool = False) -> bool:
        """Slope gate; a fit with fewer than 3 points above the floor passes only when allowed."""
        if self.below_floor:
            return allow_below_floor
        return self.slope <= exponent + margin


def _cutoff_cells(params: MultiquadricParams, target: float) -> int:
    # L_hat drops by about exp(-2 pi c) per cell away from the fundamental one.
    return max(1, int(math.ceil(math.log(100.0 / target) / (TWO_PI * params.c))))


def _initial_grid(params: MultiquadricParams, target: float, radius: float) -> SynthesisGrid:
    cells = _cutoff_cells(params, target)
    half_period = max(int(math.ceil(1.25 * radius)) + 2,
                      int(math.ceil(2.0 * params.c * math.log(10.0 / target) / math.pi)) + 2,
                      16)
    cubic = (5.0 * math.pi ** 4 / (384.0 * target)) ** 0.25
    per_unit = max(8, int(math.ceil(cubic)), 4 * (2 * cells + 1))
    return SynthesisGrid(cells=cells, half_period=half_period, per_unit=per_unit)


def _orthant_spectrum(params: MultiquadricParams, xi_axis: np.ndarray,
                      cfg: PeriodizationConfig) -> np.ndarray:
    d = params.dim
    n = xi_axis.size
    if d == 1:
        return np.asarray(cardinal_spectrum(params, xi_axis, cfg), dtype=float)
    if d == 2:
        # L_hat is symmetric under swapping coordinates.
        i, j = np.triu_indices(n)
        pts = np.column_stack([xi_axis[i], xi_axis[j]])
        vals = np.asarray(cardinal_spectrum(params, pts, cfg), dtype=float)
        out = np.empty((n, n))
        out[i, j] = vals
        out[j, i] = vals
        return out
    grids = np.meshgrid(*([xi_axis] * d), indexing="ij")
    pts = np.stack(grids, axis=-1).reshape(-1, d)
    return np.asarray(cardinal_spectrum(params, pts, cfg), dtype=float).reshape((n,) * d)


def _cosine_transform(values: np.ndarray, axis: int, n_pad: int, n_keep: int) -> np.ndarray:
    """2 sum_k v_k cos(pi n (2k+1) / (2 n_pad)) for n < n_keep along ``axis``."""
    n_in = values.shape[axis]
    if n_keep * n_in <= _MATRIX_TRANSFORM_LIMIT:
        n = np.arange(n_keep, dtype=np.int64)[:, None]
        k = np.arange(n_in, dtype=np.int64)[None, :]
        phase = (n * (2 * k + 1)) % (4 * n_pad)
        kernel = 2.0 * np.cos(math.pi * phase / (2.0 * n_pad))
        moved = np.moveaxis(values, axis, 0)
        out = (kernel @ moved.reshape(n_in, -1)).reshape((n_keep,) + moved.shape[1:])
        return np.moveaxis(out, 0, axis)
    full = sp_fft.dct(values, type=2, n=n_pad, axis=axis)
    return np.take(full, np.arange(n_keep), axis=axis)


def _mirror(orthant: np.ndarray) -> np.ndarray:
    out = orthant
    for axis in range(orthant.ndim):
        head = np.flip(np.take(out, np.arange(1, out.shape[axis]), axis=axis), axis=axis)
        out = np.concatenate([head, out], axis=axis)
    return out


def _edge_band_max(spectrum: np.ndarray, band: int) -> float:
    best = 0.0
    for axis in range(spectrum.ndim):
        tail = np.take(spectrum, np.arange(spectrum.shape[axis] - band, spectrum.shape[axis]), axis=axis)
        best = max(best, float(np.max(np.abs(tail))))
    return best


def synthesize_on_grid(params: MultiquadricParams, grid: SynthesisGrid, spatial_radius: float,
                       cfg: Optional[PeriodizationConfig] = None,
                       budget: Optional[SynthesisBudget] = None,
                       target_accuracy: float = math.nan) -> CardinalTable:
    """One synthesis pass at a fixed discretization, with its error estimate."""
    cfg = cfg or DEFAULT_PERIODIZATION
    budget = budget or SynthesisBudget()
    d = params.dim
    M = grid.half_period
    q = grid.per_unit
    K = grid.spectral_points
    n_pad = q * M
    n_keep = int(math.ceil(spatial_radius * q)) + 1 + _SPLINE_GHOSTS + 1

    if K ** d > budget.max_spectral_points:
        raise ResourceBudgetError(
            f"spectral grid {K}^{d} exceeds budget {budget.max_spectral_points}")
    if (2 * n_keep - 1) ** d > budget.max_table_points:
        raise ResourceBudgetError(
            f"table {(2 * n_keep - 1)}^{d} exceeds budget {budget.max_table_points}")
    if n_keep > n_pad:
        raise ResourceBudgetError(
            f"spatial radius {spatial_radius} too large for alias half-period {M}")

    xi_axis = (np.arange(K) + 0.5) * grid.fourier_step
    spectrum = _orthant_spectrum(params, xi_axis, cfg)
    weight = (grid.fourier_step / TWO_PI) ** d

    values = spectrum
    for axis in range(d):
        values = _cosine_transform(values, axis, n_pad, n_keep)
    values = values * weight

    line = spectrum.reshape(K, -1).sum(axis=1)
    profile = sp_fft.dct(line, type=2, n=n_pad) * weight

    # The offset grid makes the computed profile odd about x = M, so the
    # envelope is read between M/2 and 3M/4 where it is not pinned to zero.
    alias = 2.0 * d * float(np.max(np.abs(profile[n_pad // 2:(3 * n_pad) // 4])))
    tail = _edge_band_max(spectrum, M) * grid.fourier_cutoff ** (d - 1) / (params.c * math.pi ** d)
    axis_line = values[(slice(None),) + (0,) * (d - 1)]
    even_line = np.concatenate([axis_line[1:][::-1], axis_line])
    interpolation = 5.0 / 384.0 * float(np.max(np.abs(np.diff(even_line, 4))))
    roundoff = 64.0 * EPS * float(np.max(np.abs(values)))

    table = CardinalTable(
        params=params,
        spatial_step=1.0 / q,
        spatial_radius=float(spatial_radius),
        samples=_mirror(values),
        fourier_cutoff=grid.fourier_cutoff,
        alias_period=2.0 * M,
        accuracy_estimate=math.nan,
        target_accuracy=target_accuracy,
    )
    node = table.integer_node_residual()
    parts = {"alias": alias, "tail": tail, "interpolation": interpolation,
             "roundoff": roundoff, "node_residual": node}
    estimate = max(alias + tail + interpolation + roundoff, node)
    object.__setattr__(table, "accuracy_estimate", estimate)
    object.__setattr__(table, "error_parts", parts)
    return table


def synthesize(params: MultiquadricParams, target_accuracy: float = 1e-9, spatial_radius: float = 8.0,
               cfg: Optional[PeriodizationConfig] = None,
               budget: Optional[SynthesisBudget] = None) -> CardinalTable:
    """Tabulate L on [-R, R]^d with accuracy_estimate <= target_accuracy."""
    if not target_accuracy >= MIN_TARGET_ACCURACY:
        raise ParameterRangeError(f"target_accuracy must be >= {MIN_TARGET_ACCURACY}, got {target_accuracy}")
    if not spatial_radius > 0:
        raise ParameterRangeError(f"spatial_radius must be positive, got {spatial_radius}")
    budget = budget or SynthesisBudget()
    grid = _initial_grid(params, target_accuracy, spatial_radius)

    for attempt in range(1, budget.max_refinements + 1):
        table = synthesize_on_grid(params, grid, spatial_radius, cfg, budget, target_accuracy)
        parts = table.error_parts
        logger.info(f"Synthesis attempt {attempt} for alpha={params.alpha}, c={params.c}, d={params.dim}: "
                    f"cells={grid.cells}, M={grid.half_period}, q={grid.per_unit}, "
                    f"estimate={table.accuracy_estimate:.3e}")
        if table.accuracy_estimate <= target_accuracy:
            return table

        sources = {k: parts[k] for k in ("alias", "tail", "interpolation")}
        dominant = max(sources, key=sources.get)
        if parts["node_residual"] > sum(sources.values()) or dominant == "alias":
            grid = SynthesisGrid(grid.cells, 2 * grid.half_period, grid.per_unit)
        elif dominant == "tail":
            grid = SynthesisGrid(grid.cells + 1, grid.half_period,
                                 max(grid.per_unit, 4 * (2 * grid.cells + 3)))
        else:
            grid = SynthesisGrid(grid.cells, grid.half_period, 2 * grid.per_unit)

    logger.warning(f"Synthesis reached its refinement limit for alpha={params.alpha}, c={params.c}")
    raise ResourceBudgetError(
        f"could not reach accuracy {target_accuracy:.1e} within {budget.max_refinements} refinements "
        f"(last estimate {table.accuracy_estimate:.3e})")


def eval_cardinal(table: CardinalTable, x) -> np.ndarray:
    """Cubic interpolation of the table; nodes return the stored samples."""
    pts, shape = as_points(x, table.params.dim)
    a = np.abs(pts)
    limit = table.spatial_radius + table.spatial_step
    if a.size and np.max(a) > limit * (1.0 + 1e-12):
        raise TableRangeError(f"|x|_inf = {np.max(a):.6g} beyond table radius {table.spatial_radius:.6g}")
    values = table.interpolate(a)

    q = table.nodes_per_unit
    scaled = a * q
    index = np.rint(scaled)
    on_node = np.all(np.abs(scaled - index) <= 1e-9, axis=1)
    if on_node.any():
        values[on_node] = table.orthant[tuple(index[on_node].astype(np.int64).T)]
    return restore_shape(values, shape)


def _symbol_dft(params: MultiquadricParams, kind: str, index_radius: int, dft_size: int,
                cfg: PeriodizationConfig) -> np.ndarray:
    d = params.dim
    M = dft_size
    xi = -math.pi + (np.arange(M) + 0.5) * TWO_PI / M
    if d == 1:
        symbol = np.asarray(periodic_symbol_P(params, xi, cfg), dtype=float)
    else:
        grids = np.meshgrid(*([xi] * d), indexing="ij")
        pts = np.stack(grids, axis=-1).reshape(-1, d)
        symbol = np.asarray(periodic_symbol_P(params, pts, cfg), dtype=float).reshape((M,) * d)
    if kind == SYMBOL_P_INVERSE:
        symbol = 1.0 / symbol

    spectrum = sp_fft.ifftn(symbol)
    j = np.arange(-index_radius, index_radius + 1)
    coef = spectrum[np.ix_(*([j % M] * d))]
    # Offset grid xi_k = -pi + (k + 1/2) 2 pi / M contributes (-1)^j exp(i pi j / M).
    phase = np.where(j % 2 == 0, 1.0, -1.0) * np.exp(1j * math.pi * j / M)
    for axis in range(d):
        shape = [1] * d
        shape[axis] = j.size
        coef = coef * phase.reshape(shape)
    values = coef.real
    for axis in range(d):
        values = 0.5 * (values + np.flip(values, axis=axis))
    return values


def symbol_coefficients(params: MultiquadricParams, kind: str = SYMBOL_P, index_radius: int = 64,
                        dft_size: Optional[int] = None, cfg: Optional[PeriodizationConfig] = None,
                        check_aliasing: bool = True) -> CoefficientSequence:
    """Fourier coefficients of P (or 1/P) for j in [-N, N]^d."""
    if kind not in COEFFICIENT_KINDS:
        raise ValueError(f"unknown coefficient kind '{kind}'")
    if not params.decaying_range:
        raise ParameterRangeError(
            f"coefficients need alpha < -d - 1/2, got alpha={params.alpha}, d={params.dim}")
    index_radius = int(index_radius)
    if index_radius < 1:
        raise ParameterRangeError(f"index_radius must be >= 1, got {index_radius}")
    dft_size = int(dft_size) if dft_size is not None else 8 * index_radius
    if dft_size < 8 * index_radius:
        raise ParameterRangeError(f"dft_size {dft_size} must be >= 8 * index_radius")
    cfg = cfg or DEFAULT_PERIODIZATION

    values = _symbol_dft(params, kind, index_radius, dft_size, cfg)
    change = math.nan
    if check_aliasing:
        doubled = _symbol_dft(params, kind, index_radius, 2 * dft_size, cfg)
        change = float(np.max(np.abs(values - doubled)) / np.max(np.abs(doubled)))
        if change > ALIASING_TOLERANCE:
            logger.warning(f"Coefficient aliasing: doubling dft_size {dft_size} changed {kind} "
                           f"by {change:.3e} relative")
    return CoefficientSequence(kind=kind, index_radius=index_radius, values=values, dim=params.dim,
                               params=params, dft_size=dft_size, aliasing_change=change)


def series_sum(params: MultiquadricParams, coeffs: CoefficientSequence, x) -> np.ndarray:
    """sum_j w_j phi(x - j) over the coefficient box."""
    pts, shape = as_points(x, params.dim)
    shifts = coeffs.indices().astype(float)
    weights = coeffs.series_weights().ravel()
    out = np.empty(len(pts))
    step = max(1, 2_000_000 // len(shifts))
    for start in range(0, len(pts), step):
        block = pts[start:start + step]
        diff = (block[:, None, :] - shifts[None, :, :]).reshape(-1, params.dim)
        phi = np.asarray(phi_eval(params, diff)).reshape(len(block), len(shifts))
        out[start:start + step] = (phi * weights[None, :]).sum(axis=1)
    return restore_shape(out, shape)


def series_tail_bound(params: MultiquadricParams, coeffs: CoefficientSequence, pts: np.ndarray) -> float:
    # |a_j| beyond the box is bounded by the largest last-shell magnitude.
    weights = np.abs(coeffs.series_weights())
    inner = weights[(slice(1, -1),) * coeffs.dim]
    mask = np.ones(weights.shape, dtype=bool)
    mask[(slice(1, -1),) * coeffs.dim] = False
    shell_max = float(np.max(weights[mask])) if inner.size < weights.size else 0.0
    reach = float(np.max(np.abs(pts))) if pts.size else 0.0
    N = coeffs.index_radius
    total = 0.0
    for k in range(N + 1, N + 2001):
        count = (2 * k + 1) ** coeffs.dim - (2 * k - 1) ** coeffs.dim
        distance = max(k - reach, 0.0)
        total += count * (distance ** 2 + params.c ** 2) ** params.alpha
    return shell_max * total


def check_series_representation(params: MultiquadricParams, table: CardinalTable,
                                coeffs: CoefficientSequence, points) -> SeriesCheck:
    """Compare the table against sum_j a_j phi(x - j) at the given points."""
    if not params.decaying_range:
        raise ParameterRangeError("series representation needs alpha < -d - 1/2")
    if coeffs.kind != SYMBOL_P:
        raise ValueError(f"series representation uses {SYMBOL_P} coefficients, got {coeffs.kind}")
    pts, _ = as_points(points, params.dim)
    lhs = np.atleast_1d(eval_cardinal(table, pts))
    rhs = np.atleast_1d(series_sum(params, coeffs, pts))
    residual = float(np.max(np.abs(lhs - rhs)))
    tail = series_tail_bound(params, coeffs, pts)
    logger.info(f"Series representation residual {residual:.3e} (tail bound {tail:.3e}) "
                f"over {len(pts)} points")
    return SeriesCheck(max_abs_residual=residual, tail_bound=tail, n_points=len(pts))


def convolve_coefficients(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return signal.convolve(a, b, mode="full", method="direct")


def convolution_inverse_residual(a_seq: CoefficientSequence, d_seq: CoefficientSequence,
                                 inner: Optional[int] = None) -> float:
    """l1 norm of (a * d - delta) over |m|_inf <= inner.

    Entries near the truncation radius N miss the tails of a and d; the
    default window is N // 4.
    """
    full = convolve_coefficients(a_seq.values, d_seq.values)
    center = a_seq.index_radius + d_seq.index_radius
    radius = min(a_seq.index_radius, d_seq.index_radius)
    reach = radius // 4 if inner is None else int(inner)
    if not 0 <= reach <= radius:
        raise ParameterRangeError(f"inner window {reach} must lie in [0, {radius}]")
    window = full[(slice(center - reach, center + reach + 1),) * a_seq.dim].copy()
    window[(reach,) * a_seq.dim] -= 1.0
    return DataProcessor.compensated_sum(np.abs(window).ravel())


def partition_of_unity_residual(table: CardinalTable, points, n_terms: int) -> float:
    """max |sum_{|j|_inf <= n_terms} L(x - j) - 1| over the points."""
    params = table.params
    if params.alpha < 0.5:
        raise ParameterRangeError("partition of unity holds for alpha >= 1/2 only")
    pts, _ = as_points(points, params.dim)
    axis = np.arange(-n_terms, n_terms + 1)
    shifts = np.stack(np.meshgrid(*([axis] * params.dim), indexing="ij"), axis=-1).reshape(-1, params.dim)
    args = (pts[:, None, :] - shifts[None, :, :]).reshape(-1, params.dim)
    vals = np.asarray(eval_cardinal(table, args)).reshape(len(pts), len(shifts))
    return float(np.max(np.abs(vals.sum(axis=1) - 1.0)))


def decay_fit(table: CardinalTable, r_min: float = 10.0, r_max: Optional[float] = None,
              floor: float = 1e-12, n_samples: int = 40) -> DecayFit:
    """Log-log slope of the outer envelope of |L| along the first axis."""
    r_max = r_max if r_max is not None else 0.9 * table.spatial_radius
    if not r_max > r_min:
        raise ParameterRangeError(f"decay fit needs r_max > r_min, got [{r_min}, {r_max}]")
    d = table.params.dim
    line = table.orthant[(slice(None),) + (0,) * (d - 1)]
    envelope = DataProcessor.outer_envelope(line)
    q = table.nodes_per_unit
    xs = np.unique(np.rint(np.geomspace(r_min, r_max, n_samples) * q).astype(np.int64))
    xs = xs[xs < envelope.size]
    points = [(n / q, envelope[n]) for n in xs if envelope[n] > floor]
    if len(points) < 3:
        return DecayFit(slope=-math.inf, residual=0.0, n_points=len(points), below_floor=True)
    slope, residual = DataProcessor.loglog_slope(points)
    return DecayFit(slope=slope, residual=residual, n_points=len(points))
