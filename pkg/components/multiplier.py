"""The interpolation multiplier m(xi) = L_hat(h xi) for c = 1/h, and its derivatives.

m is evaluated as the cardinal spectrum with c = 1 and period 2 pi / h.
Derivatives are central finite differences with two Richardson levels; the
difference between the levels is kept as a consistency indicator. All
quadratures run over the positive orthant on Gauss panels graded toward the
cell faces (2k+1) pi / h, with thin bands around the faces left out.
"""
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import legendre

from components.kernel import (
    DEFAULT_PERIODIZATION,
    TWO_PI,
    MultiquadricParams,
    PeriodizationConfig,
    as_points,
    cardinal_spectrum,
    restore_shape,
)
from utils.data_processor import DataProcessor
from utils.errors import FitError, ParameterRangeError, StencilFaceError, TruncationError
from utils.format_helpers import format_multi_index

logger = logging.getLogger(__name__)

MultiIndex = Tuple[int, ...]

DEFAULT_FD_STEP = 1e-3 * TWO_PI
RICHARDSON_TOL = 1e-5
RICHARDSON_FLOOR = 1e-9
MAX_EXCLUDED_FRACTION = 0.01
REGIONS = ("I", "II", "III")


@dataclass(frozen=True)
class QuadratureConfig:
    panel_base: float = 0.05
    order: int = 8
    shells: int = 2
    fd_step: float = DEFAULT_FD_STEP
    richardson_tol: float = RICHARDSON_TOL
    tail_tol: float = 1e-6

    @property
    def band_halfwidth(self) -> float:
        # Twice the stencil radius on either side of a face.
        return 2.0 * self.fd_step

    @classmethod
    def coarse(cls) -> "QuadratureConfig":
        return cls(panel_base=0.1, order=4, shells=1)

    @classmethod
    def from_config(cls, config: Optional[Dict[str, Any]]) -> "QuadratureConfig":
        section = (config or {}).get("multiplier", {})
        return cls(panel_base=float(section.get("panel_base", 0.05)),
                   order=int(section.get("order", 8)),
                   shells=int(section.get("shells", 2)),
                   fd_step=float(section.get("fd_step", DEFAULT_FD_STEP)),
                   richardson_tol=float(section.get("richardson_tol", RICHARDSON_TOL)))


@dataclass(frozen=True)
class PartialResult:
    value: np.ndarray
    consistency: np.ndarray

    def consistent(self, tol: float = RICHARDSON_TOL) -> np.ndarray:
        return self.consistency <= tol * np.abs(self.value) + RICHARDSON_FLOOR


@dataclass
class L1NormResult:
    h: float
    gamma: MultiIndex
    value: float
    error_bar: float
    shell_contributions: List[float]
    region_sups: Dict[str, float]
    n_points: int
    n_excluded: int

    @property
    def excluded_fraction(self) -> float:
        return self.n_excluded / self.n_points if self.n_points else 0.0

    def within_exclusion_limit(self) -> bool:
        return self.excluded_fraction < MAX_EXCLUDED_FRACTION

    def shells_decay_geometrically(self) -> bool:
        shells = self.shell_contributions
        return all(b <= a for a, b in zip(shells[1:-1], shells[2:]))

    def to_dict(self) -> Dict[str, Any]:
        return {"h": self.h, "gamma": format_multi_index(self.gamma), "value": self.value,
                "error_bar": self.error_bar, "shell_contributions": list(self.shell_contributions),
                "region_sups": dict(self.region_sups), "n_points": self.n_points,
                "n_excluded": self.n_excluded, "within_exclusion_limit": self.within_exclusion_limit()}


@dataclass
class MultiplierProfile:
    alpha: float
    dim: int
    h_list: List[float]
    gamma_list: List[MultiIndex]
    l1_norms: np.ndarray
    region_sups: List[Dict[str, Any]]
    fitted_slopes: Dict[MultiIndex, float]
    slope_residuals: Dict[MultiIndex, float]
    results: List[L1NormResult] = field(default_factory=list)

    def max_excluded_fraction(self, gamma: MultiIndex) -> float:
        return max((r.excluded_fraction for r in self.results if r.gamma == gamma), default=0.0)

    def passes(self, margin: float = 0.3) -> Dict[MultiIndex, bool]:
        """One-sided gate: slope >= [gamma] - margin, with every norm under the exclusion limit."""
        return {g: self.fitted_slopes[g] >= sum(g) - margin
                and all(r.within_exclusion_limit() for r in self.results if r.gamma == g)
                for g in self.gamma_list}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "alpha": self.alpha,
            "dim": self.dim,
            "h_list": list(self.h_list),
            "gamma_list": [format_multi_index(g) for g in self.gamma_list],
            "l1_norms": self.l1_norms.tolist(),
            "fitted_slopes": {format_multi_index(g): s for g, s in self.fitted_slopes.items()},
            "slope_residuals": {format_multi_index(g): s for g, s in self.slope_residuals.items()},
            "passes": {format_multi_index(g): ok for g, ok in self.passes().items()},
            "max_excluded_fraction": {format_multi_index(g): self.max_excluded_fraction(g) for g in self.gamma_list},
            "region_sups": self.region_sups,
            "details": [r.to_dict() for r in self.results],
        }


def _params(alpha: float, dim: int) -> MultiquadricParams:
    return MultiquadricParams(alpha, 1.0, dim)


def m_eval(alpha: float, dim: int, h: float, xi, cfg: Optional[PeriodizationConfig] = None):
    """m(xi) = phi_hat_1(xi) / sum_j phi_hat_1(xi + 2 pi j / h)."""
    if not 0.0 < h <= 1.0:
        raise ParameterRangeError(f"h must lie in (0, 1], got {h}")
    return cardinal_spectrum(_params(alpha, dim), xi, cfg or DEFAULT_PERIODIZATION, period=TWO_PI / h)


def face_distance(xi: np.ndarray, h: float) -> np.ndarray:
    """Distance of each point to the nearest face (2k+1) pi / h in any coordinate."""
    scale = math.pi / h
    t = np.abs(np.asarray(xi, dtype=float)) / scale
    odd = 2.0 * np.floor(t / 2.0) + 1.0
    return np.min(np.abs(t - odd), axis=-1) * scale


def _stencil(gamma: MultiIndex, step: float) -> Tuple[np.ndarray, np.ndarray]:
    d = len(gamma)
    axes = [i for i, g in enumerate(gamma) for _ in range(g)]
    offsets, coefs = [], []
    if len(axes) == 1:
        for sign in (1.0, -1.0):
            e = np.zeros(d)
            e[axes[0]] = sign * step
            offsets.append(e)
            coefs.append(sign / (2.0 * step))
    elif axes[0] == axes[1]:
        for sign, c in ((1.0, 1.0), (0.0, -2.0), (-1.0, 1.0)):
            e = np.zeros(d)
            e[axes[0]] = sign * step
            offsets.append(e)
            coefs.append(c / step ** 2)
    else:
        for s1, s2 in itertools.product((1.0, -1.0), repeat=2):
            e = np.zeros(d)
            e[axes[0]] = s1 * step
            e[axes[1]] = s2 * step
            offsets.append(e)
            coefs.append(s1 * s2 / (4.0 * step ** 2))
    return np.array(offsets), np.array(coefs)


def _check_gamma(gamma: Sequence[int], dim: int) -> MultiIndex:
    gamma = tuple(int(g) for g in gamma)
    if len(gamma) != dim or any(g < 0 for g in gamma):
        raise ParameterRangeError(f"multi-index {gamma} does not fit dimension {dim}")
    if sum(gamma) > 2:
        raise ParameterRangeError(f"derivatives of order {sum(gamma)} > 2 are not supported")
    return gamma


def m_partial(alpha: float, dim: int, h: float, gamma: Sequence[int], xi,
              step: float = DEFAULT_FD_STEP, cfg: Optional[PeriodizationConfig] = None) -> PartialResult:
    """D^gamma m by central differences at steps s, s/2, s/4 with Richardson extrapolation."""
    gamma = _check_gamma(gamma, dim)
    pts, shape = as_points(xi, dim)
    if sum(gamma) == 0:
        value = np.atleast_1d(np.asarray(m_eval(alpha, dim, h, pts, cfg), dtype=float))
        return PartialResult(restore_shape(value, shape), restore_shape(np.zeros_like(value), shape))
    if len(pts) and np.min(face_distance(pts, h)) <= step:
        raise StencilFaceError(f"finite-difference stencil of radius {step} crosses a cell face")

    levels = (step, step / 2.0, step / 4.0)
    stencils = [_stencil(gamma, s) for s in levels]
    all_offsets = np.concatenate([off for off, _ in stencils])
    shifted = (pts[:, None, :] + all_offsets[None, :, :]).reshape(-1, dim)
    values = np.asarray(m_eval(alpha, dim, h, shifted, cfg), dtype=float).reshape(len(pts), len(all_offsets))

    diffs = []
    start = 0
    for off, coefs in stencils:
        diffs.append(values[:, start:start + len(off)] @ coefs)
        start += len(off)
    r1 = (4.0 * diffs[1] - diffs[0]) / 3.0
    r2 = (4.0 * diffs[2] - diffs[1]) / 3.0
    return PartialResult(restore_shape(r2, shape), restore_shape(np.abs(r1 - r2), shape))


def _graded_edges(lo: float, hi: float, base: float) -> np.ndarray:
    half = 0.5 * (hi - lo)
    ds = [0.0]
    t = base
    while t < half:
        ds.append(t)
        t *= 2.0
    ds.append(half)
    ds = np.array(ds)
    return np.unique(np.concatenate([lo + ds, hi - ds]))


def axis_nodes(h: float, quad: QuadratureConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss nodes on [0, (2J+1) pi / h] graded toward faces, face bands removed."""
    faces = [(2 * k + 1) * math.pi / h for k in range(quad.shells + 1)]
    b = quad.band_halfwidth
    bounds = [0.0] + [x for f in faces for x in (f - b, f + b)]
    base_x, base_w = legendre.leggauss(quad.order)
    nodes, weights = [], []
    for lo, hi in zip(bounds[0::2], bounds[1::2]):
        edges = _graded_edges(lo, hi, quad.panel_base)
        for a, c in zip(edges[:-1], edges[1:]):
            half = 0.5 * (c - a)
            nodes.append(a + half * (base_x + 1.0))
            weights.append(half * base_w)
    return np.concatenate(nodes), np.concatenate(weights)


def orthant_grid(dim: int, h: float, quad: QuadratureConfig) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = axis_nodes(h, quad)
    pts = np.stack(np.meshgrid(*([nodes] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    w = weights
    for _ in range(dim - 1):
        w = np.multiply.outer(w, weights)
    return pts, w.ravel()


def _band_measure(dim: int, h: float, quad: QuadratureConfig) -> float:
    extent = (2 * quad.shells + 1) * math.pi / h
    faces = quad.shells + 1
    return dim * faces * 2.0 * quad.band_halfwidth * extent ** (dim - 1)


def _check_admissible(alpha: float, dim: int, order: int) -> None:
    if order == 0:
        return
    if alpha > 0:
        if order > 2 * alpha + dim:
            raise ParameterRangeError(f"[gamma]={order} exceeds 2 alpha + d = {2 * alpha + dim}")
    elif alpha < -dim - 0.5:
        if order >= 2 * abs(alpha) - dim:
            raise ParameterRangeError(f"[gamma]={order} must be < 2|alpha| - d = {2 * abs(alpha) - dim}")
    else:
        raise ParameterRangeError(f"alpha={alpha} is outside the multiplier derivative range for d={dim}")


def l1_norm_dgamma(alpha: float, dim: int, h: float, gamma: Sequence[int],
                   quad: Optional[QuadratureConfig] = None,
                   cfg: Optional[PeriodizationConfig] = None) -> L1NormResult:
    """||D^gamma m||_L1 over shells |j|_inf <= J of lattice cells, plus tail and band error bar."""
    quad = quad or QuadratureConfig()
    gamma = _check_gamma(gamma, dim)
    order = sum(gamma)
    _check_admissible(alpha, dim, order)

    pts, weights = orthant_grid(dim, h, quad)
    partial = m_partial(alpha, dim, h, gamma, pts, quad.fd_step, cfg)
    value = np.abs(np.atleast_1d(partial.value))
    ok = np.atleast_1d(partial.consistent(quad.richardson_tol))
    n_excluded = int(np.count_nonzero(~ok))
    if n_excluded:
        logger.warning(f"Excluded {n_excluded} of {len(pts)} points with inconsistent Richardson levels "
                       f"(h={h}, gamma={gamma})")

    mirror = 2.0 ** dim
    cells = np.rint(pts * h / TWO_PI).astype(np.int64)
    shell = np.max(cells, axis=1)
    contrib = np.where(ok, weights * value, 0.0)
    shells = mirror * np.bincount(shell, weights=contrib, minlength=quad.shells + 1)
    total = DataProcessor.compensated_sum(shells)

    region_of = np.minimum(shell, 2)
    region_sups = {}
    for r, name in enumerate(REGIONS):
        sel = (region_of == r) & ok
        region_sups[name] = float(np.max(value[sel])) if sel.any() else 0.0

    sup = float(np.max(value[ok])) if ok.any() else 0.0
    remainder = 0.0
    if quad.shells >= 1 and shells[-2] > 0:
        ratio = shells[-1] / shells[-2]
        if ratio >= 1.0 and shells[-1] > quad.tail_tol * total:
            raise TruncationError(f"multiplier L1 shells not decaying at h={h}, gamma={gamma}")
        remainder = shells[-1] * ratio / (1.0 - ratio) if ratio < 1.0 else shells[-1]
    error_bar = (mirror * sup * _band_measure(dim, h, quad) + remainder
                 + mirror * sup * float(np.sum(weights[~ok])))

    logger.info(f"||D^{gamma} m||_L1 = {total:.6e} (+/- {error_bar:.2e}) at h={h}, alpha={alpha}, d={dim}")
    return L1NormResult(h=float(h), gamma=gamma, value=total + remainder, error_bar=error_bar,
                        shell_contributions=[float(s) for s in shells], region_sups=region_sups,
                        n_points=len(pts), n_excluded=n_excluded)


def scaling_fit(alpha: float, dim: int, h_list: Sequence[float], gamma_list: Sequence[Sequence[int]],
                quad: Optional[QuadratureConfig] = None, cfg: Optional[PeriodizationConfig] = None,
                workers: int = 1) -> MultiplierProfile:
    """Log-log slope of ||D^gamma m||_L1 against h for each gamma."""
    h_list = [float(h) for h in h_list]
    if len(h_list) < 4 or max(h_list) / min(h_list) < 8.0:
        raise FitError("scaling fit needs at least 4 values of h spanning a factor of 8")
    gammas = [_check_gamma(g, dim) for g in gamma_list]
    jobs = [(h, g) for h in h_list for g in gammas]

    def run(job):
        return l1_norm_dgamma(alpha, dim, job[0], job[1], quad, cfg)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        results = list(executor.map(run, jobs))

    norms = np.array([r.value for r in results]).reshape(len(h_list), len(gammas))
    slopes, residuals = {}, {}
    for col, g in enumerate(gammas):
        slope, res = DataProcessor.loglog_slope(zip(h_list, norms[:, col]))
        slopes[g] = slope
        residuals[g] = res
        logger.info(f"Multiplier scaling slope for gamma={g}: {slope:.3f} (residual {res:.2e})")
    sups = [{"h": r.h, "gamma": format_multi_index(r.gamma), **r.region_sups} for r in results]
    return MultiplierProfile(alpha=alpha, dim=dim, h_list=h_list, gamma_list=gammas, l1_norms=norms,
                             region_sups=sups, fitted_slopes=slopes, slope_residuals=residuals,
                             results=results)


def mikhlin_gammas(dim: int) -> List[MultiIndex]:
    top = min(dim, 2)
    return [g for g in itertools.product(range(top + 1), repeat=dim) if sum(g) <= top]


def mikhlin_check(alpha: float, dim: int, h: float, grid: Optional[np.ndarray] = None,
                  quad: Optional[QuadratureConfig] = None,
                  cfg: Optional[PeriodizationConfig] = None) -> Dict[MultiIndex, float]:
    """sup over the grid of |xi|^[gamma] |D^gamma m(xi)| for every [gamma] <= min(d, 2)."""
    quad = quad or QuadratureConfig.coarse()
    if grid is None:
        grid, _ = orthant_grid(dim, h, quad)
    pts, _ = as_points(grid, dim)
    radius = np.linalg.norm(pts, axis=1)
    sups = {}
    for g in mikhlin_gammas(dim):
        partial = m_partial(alpha, dim, h, g, pts, quad.fd_step, cfg)
        sups[g] = float(np.max(radius ** sum(g) * np.abs(np.atleast_1d(partial.value))))
    return sups


def mikhlin_stability(alpha: float, dim: int, h_list: Sequence[float],
                      quad: Optional[QuadratureConfig] = None,
                      cfg: Optional[PeriodizationConfig] = None) -> Dict[MultiIndex, Dict[str, Any]]:
    """Per-gamma suprema across h and their max/min ratio."""
    per_h = [mikhlin_check(alpha, dim, h, quad=quad, cfg=cfg) for h in h_list]
    out = {}
    for g in per_h[0]:
        values = [s[g] for s in per_h]
        low = min(values)
        out[g] = {"sups": values, "ratio": max(values) / low if low > 0 else math.inf}
    return out
