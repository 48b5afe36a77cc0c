"""Lattice interpolation with the scale-matched cardinal function.

The interpolant of data g on hZ^d is

    I g(x) = sum_j g(hj) L(x/h - j),

where L is the cardinal function for shape parameter c = 1/h. Only compactly
supported data is handled, so the sum is finite and exact over the index box.
"""
import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import legendre
from scipy.interpolate import BSpline

from components.cardinal import (
    CardinalTable,
    CoefficientSequence,
    convolve_coefficients,
    eval_cardinal,
    series_tail_bound,
    synthesize,
)
from components.kernel import (
    DEFAULT_PERIODIZATION,
    TWO_PI,
    MultiquadricParams,
    PeriodizationConfig,
    as_points,
    cardinal_spectrum,
    phi_eval,
    restore_shape,
)
from utils.errors import ParameterRangeError, TableRangeError

logger = logging.getLogger(__name__)

IndexBox = Tuple[Tuple[int, int], ...]
# Upper bound on (points x data) cardinal evaluations per chunk.
_CHUNK_TERMS = 1 << 20


def default_accuracy(dim: int) -> float:
    return 1e-9 if dim == 1 else 1e-7


def _normalize_box(index_box: Union[int, Sequence[Sequence[int]]], dim: Optional[int]) -> IndexBox:
    if isinstance(index_box, (int, np.integer)):
        n = int(index_box)
        return tuple((-n, n) for _ in range(dim or 1))
    box = tuple((int(lo), int(hi)) for lo, hi in index_box)
    if dim is not None and len(box) != dim:
        raise ValueError(f"index box has {len(box)} axes, expected {dim}")
    if any(hi < lo for lo, hi in box):
        raise ValueError(f"empty index box {box}")
    return box


@dataclass(frozen=True, eq=False)
class LatticeSamples:
    h: float
    dim: int
    index_box: IndexBox
    values: np.ndarray

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"lattice spacing must be positive, got {self.h}")
        expected = tuple(hi - lo + 1 for lo, hi in self.index_box)
        if self.values.shape != expected:
            raise ValueError(f"values shape {self.values.shape} does not match box {self.index_box}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("lattice samples must be finite")
        self.values.setflags(write=False)

    def indices(self) -> np.ndarray:
        axes = [np.arange(lo, hi + 1) for lo, hi in self.index_box]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)

    def nodes(self) -> np.ndarray:
        return self.indices() * self.h

    def nonzero(self) -> Tuple[np.ndarray, np.ndarray]:
        flat = self.values.ravel()
        keep = flat != 0.0
        return self.indices()[keep], flat[keep]

    @property
    def box_radius(self) -> int:
        return max(max(abs(lo), abs(hi)) for lo, hi in self.index_box)

    def __add__(self, other: "LatticeSamples") -> "LatticeSamples":
        if other.h != self.h or other.index_box != self.index_box:
            raise ValueError("samples must share spacing and index box")
        return replace(self, values=self.values + other.values)

    def shifted(self, axis: int, steps: int) -> "LatticeSamples":
        """The same values moved by ``steps`` lattice points along ``axis``."""
        box = list(self.index_box)
        lo, hi = box[axis]
        box[axis] = (lo + steps, hi + steps)
        return replace(self, index_box=tuple(box), values=self.values.copy())


def sample(f: Callable[[np.ndarray], np.ndarray], h: float,
           index_box: Union[int, Sequence[Sequence[int]]], dim: Optional[int] = None) -> LatticeSamples:
    """values[j] = f(hj) over the index box; f receives an (n, d) array."""
    box = _normalize_box(index_box, dim)
    d = len(box)
    axes = [np.arange(lo, hi + 1) for lo, hi in box]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d) * h
    raw = np.asarray(f(pts), dtype=float)
    if raw.size == 1:
        raw = np.full(len(pts), float(raw.ravel()[0]))
    values = raw.reshape(tuple(hi - lo + 1 for lo, hi in box))
    return LatticeSamples(h=float(h), dim=d, index_box=box, values=values)


@dataclass(frozen=True, eq=False)
class Interpolant:
    params: MultiquadricParams
    h: float
    samples: LatticeSamples
    table: CardinalTable

    @property
    def truncation_radius(self) -> int:
        """Index-space cutoff of the evaluation sums, set by the table radius."""
        return int(math.floor(self.table.spatial_radius))

    def __call__(self, x) -> np.ndarray:
        return evaluate(self, x)


def build(alpha: float, dim: int, h: float, samples: LatticeSamples, accuracy: Optional[float] = None,
          eval_radius: Optional[float] = None, cfg: Optional[PeriodizationConfig] = None,
          cache=None) -> Interpolant:
    """Interpolant of ``samples`` with the cardinal function at c = 1/h.

    ``eval_radius`` is the largest |x|_inf the interpolant will be evaluated
    at; the table is sized to reach every data index from there. ``cache`` is
    an optional TableCache.
    """
    params = MultiquadricParams(alpha, 1.0 / h, dim)
    if not (params.theorem_range or params.is_poisson):
        raise ParameterRangeError(
            f"alpha={alpha} is outside the interpolation range for d={dim}")
    if samples.h != h or samples.dim != dim:
        raise ValueError(f"samples (h={samples.h}, d={samples.dim}) do not match h={h}, d={dim}")
    accuracy = accuracy if accuracy is not None else default_accuracy(dim)
    if eval_radius is None:
        eval_radius = 1.5 * samples.box_radius * h + h
    radius = eval_radius / h + samples.box_radius + 2.0

    if cache is not None:
        table = cache.get_or_synthesize(params, accuracy, radius)
    else:
        table = synthesize(params, accuracy, radius, cfg)
    logger.info(f"Built interpolant alpha={alpha}, d={dim}, h={h} with table radius {radius:.1f}")
    return Interpolant(params=params, h=float(h), samples=samples, table=table)


def _reach(y: np.ndarray, idx: np.ndarray) -> float:
    lo = idx.min(axis=0)
    hi = idx.max(axis=0)
    return float(np.max(np.maximum(np.abs(y - lo), np.abs(y - hi))))


def evaluate(interp: Interpolant, x) -> np.ndarray:
    """sum_j g(hj) L(x/h - j) over the nonzero samples."""
    pts, shape = as_points(x, interp.params.dim)
    out = np.zeros(len(pts))
    idx, vals = interp.samples.nonzero()
    if idx.size == 0 or len(pts) == 0:
        return restore_shape(out, shape)
    y = pts / interp.h
    reach = _reach(y, idx)
    if reach > interp.truncation_radius:
        raise TableRangeError(f"evaluation reaches {reach:.1f} lattice steps, "
                              f"table covers {interp.truncation_radius}")
    step = max(1, _CHUNK_TERMS // len(idx))
    for start in range(0, len(y), step):
        block = y[start:start + step]
        args = (block[:, None, :] - idx[None, :, :]).reshape(-1, interp.params.dim)
        card = np.asarray(eval_cardinal(interp.table, args)).reshape(len(block), len(idx))
        out[start:start + step] = (card * vals[None, :]).sum(axis=1)
    return restore_shape(out, shape)


@dataclass(frozen=True)
class PhiFormResult:
    values: np.ndarray
    tail_bound: float


def eval_phi_form(interp: Interpolant, coeffs: CoefficientSequence, x) -> PhiFormResult:
    """sum_m (a * b)_m phi(x/h - m) with b the lattice samples."""
    params = interp.params
    if not params.decaying_range:
        raise ParameterRangeError("the phi-form needs alpha < -d - 1/2")
    if coeffs.params != params:
        raise ValueError("coefficients must belong to the dilated parameters of the interpolant")
    pts, shape = as_points(x, params.dim)
    y = pts / interp.h

    b = interp.samples.values
    weights = convolve_coefficients(coeffs.series_weights(), b)
    lo = np.array([box_lo - coeffs.index_radius for box_lo, _ in interp.samples.index_box])
    axes = [np.arange(n) + lo[i] for i, n in enumerate(weights.shape)]
    centers = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, params.dim).astype(float)
    w = weights.ravel()

    out = np.empty(len(y))
    step = max(1, _CHUNK_TERMS // len(w))
    for start in range(0, len(y), step):
        block = y[start:start + step]
        diff = (block[:, None, :] - centers[None, :, :]).reshape(-1, params.dim)
        phi = np.asarray(phi_eval(params, diff)).reshape(len(block), len(w))
        out[start:start + step] = (phi * w[None, :]).sum(axis=1)

    idx, _ = interp.samples.nonzero()
    reach = _reach(y, idx) if idx.size else 0.0
    tail = float(np.abs(b).sum()) * series_tail_bound(params, coeffs, np.array([[reach]]))
    return PhiFormResult(values=restore_shape(out, shape), tail_bound=tail)


def _window_axes(window, dim: int, grid_step: float):
    if isinstance(window, (int, float)):
        window = [(-float(window), float(window))] * dim
    axes, weights = [], []
    for lo, hi in window:
        cells = (hi - lo) / grid_step
        n = int(round(cells))
        if n < 1 or abs(cells - n) > 1e-9 * max(1.0, cells):
            raise ValueError(f"grid_step {grid_step} does not divide the window [{lo}, {hi}]")
        axes.append(lo + np.arange(n + 1) * grid_step)
        w = np.full(n + 1, grid_step)
        w[0] = w[-1] = 0.5 * grid_step
        weights.append(w)
    return axes, weights


def lp_error(u: Callable, v: Callable, p: float, window, grid_step: float, dim: int = 1) -> float:
    """Trapezoid-weighted discrete L_p norm of u - v on a box window."""
    if not (p >= 1.0):
        raise ValueError(f"p must be in [1, inf], got {p}")
    axes, weights = _window_axes(window, dim, grid_step)
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    diff = np.abs(np.asarray(u(pts), dtype=float).ravel() - np.asarray(v(pts), dtype=float).ravel())
    if math.isinf(p):
        return float(np.max(diff))
    w = weights[0]
    for extra in weights[1:]:
        w = np.multiply.outer(w, extra)
    return float(np.sum(w.ravel() * diff ** p) ** (1.0 / p))


@dataclass(frozen=True)
class BandlimitedFunction:
    """f(x) = amplitude * (sin(a x) / (a x))^power with a = sigma / power.

    The transform is (pi / a) * M_power(xi / (2a)) with M_power the centered
    cardinal B-spline, so f is bandlimited to |xi| <= sigma.
    """
    sigma: float
    power: int = 4
    amplitude: float = 1.0

    @property
    def a(self) -> float:
        return self.sigma / self.power

    def __call__(self, x) -> np.ndarray:
        pts, shape = as_points(x, 1)
        vals = self.amplitude * np.sinc(self.a * pts[:, 0] / math.pi) ** self.power
        return restore_shape(vals, shape)

    def fourier(self, xi: np.ndarray) -> np.ndarray:
        knots = np.arange(self.power + 1) - 0.5 * self.power
        spline = BSpline.basis_element(knots, extrapolate=False)
        vals = np.nan_to_num(spline(np.asarray(xi, dtype=float) / (2.0 * self.a)), nan=0.0)
        return self.amplitude * (math.pi / self.a) * vals

    def transform_knots(self) -> np.ndarray:
        return 2.0 * self.a * (np.arange(self.power + 1) - 0.5 * self.power)


def _gauss_panels(breaks: np.ndarray, max_width: float, order: int = 16) -> Tuple[np.ndarray, np.ndarray]:
    base_x, base_w = legendre.leggauss(order)
    nodes, weights = [], []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi <= lo:
            continue
        panels = max(1, int(math.ceil((hi - lo) / max_width)))
        edges = np.linspace(lo, hi, panels + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            half = 0.5 * (b - a)
            nodes.append(a + half * (base_x + 1.0))
            weights.append(half * base_w)
    return np.concatenate(nodes), np.concatenate(weights)


def fourier_identity_residual(f: BandlimitedFunction, h: float, alpha: float, window: float = 2.0,
                              n_data: int = 512, accuracy: float = 1e-10, n_points: int = 201,
                              cells: int = 2, cfg: Optional[PeriodizationConfig] = None,
                              cache=None) -> float:
    """Relative L2 gap between the interpolant and the inverse transform of F(xi) m(xi).

    F is the 2 pi / h periodization of f_hat and m the multiplier at spacing h;
    the Fourier side is integrated with Gauss panels split at every knot of F,
    every cell face and every lattice point.
    """
    if f.sigma > (math.pi + 0.5) / h:
        raise ParameterRangeError(f"band {f.sigma} exceeds (pi + 1/2)/h for h={h}")
    cfg = cfg or DEFAULT_PERIODIZATION
    xs = np.linspace(-window, window, n_points)

    samples = sample(f, h, n_data, dim=1)
    interp = build(alpha, 1, h, samples, accuracy, eval_radius=window, cfg=cfg, cache=cache)
    spatial = np.asarray(evaluate(interp, xs))

    period = TWO_PI / h
    limit = (2 * cells + 1) * math.pi / h
    breaks = [0.0, limit]
    for k in range(cells + 1):
        breaks.extend(k * period + f.transform_knots())
        breaks.extend([k * period, (k + 0.5) * period])
    breaks = np.unique(np.clip(np.array(breaks), 0.0, limit))
    nodes, weights = _gauss_panels(breaks, max_width=0.5)

    folded_idx = np.rint(nodes / period)
    folded = nodes - period * folded_idx
    periodized = sum(f.fourier(folded - j * period) for j in (-1, 0, 1))
    m = np.asarray(cardinal_spectrum(MultiquadricParams(alpha, 1.0, 1), nodes, cfg, period=period))
    integrand = weights * periodized * m
    fourier = (np.cos(np.outer(xs, nodes)) @ integrand) / math.pi

    norm = float(np.linalg.norm(fourier))
    gap = float(np.linalg.norm(spatial - fourier))
    if norm == 0.0:
        return gap
    residual = gap / norm
    logger.info(f"Fourier identity residual {residual:.3e} at h={h}, sigma={f.sigma}, power={f.power}")
    return residual
