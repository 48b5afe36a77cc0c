"""Multiquadric kernel, its radial transform, and the periodized ratios built on it.

Transforms are only ever handled as logarithms. The lattice sums entering the
cardinal spectrum are formed from differences of logs, so the computation
stays in range at shape parameters where the transform itself underflows.
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from utils.errors import DomainError, ParameterRangeError, TruncationError
from utils.specfun import SignedLogValue, log_bessel_k, log_gamma_signed

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
_LOG_2 = math.log(2.0)
# Upper bound on (points x lattice terms) held in memory per lattice-sum chunk.
_CHUNK_TERMS = 1 << 21

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class MultiquadricParams:
    alpha: float
    c: float = 1.0
    dim: int = 1

    def __post_init__(self):
        alpha = float(self.alpha)
        c = float(self.c)
        if not math.isfinite(alpha):
            raise ParameterRangeError(f"alpha must be finite, got {self.alpha}")
        if alpha >= 0.0 and alpha == math.floor(alpha):
            raise ParameterRangeError(f"alpha must not be a nonnegative integer, got {alpha}")
        if not (math.isfinite(c) and c > 0.0):
            raise ParameterRangeError(f"shape parameter c must be positive, got {self.c}")
        if int(self.dim) != self.dim or int(self.dim) < 1:
            raise ParameterRangeError(f"dim must be a positive integer, got {self.dim}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "dim", int(self.dim))

    @property
    def nu(self) -> float:
        return self.alpha + 0.5 * self.dim

    @property
    def decaying_range(self) -> bool:
        """alpha < -d - 1/2, where the periodic symbol is bounded and positive."""
        return self.alpha < -self.dim - 0.5

    @property
    def theorem_range(self) -> bool:
        return self.decaying_range or self.alpha >= 0.5

    @property
    def is_poisson(self) -> bool:
        return self.alpha == -1.0 and self.dim == 1

    def to_dict(self) -> Dict[str, Any]:
        return {"alpha": self.alpha, "c": self.c, "dim": self.dim, "nu": self.nu,
                "theorem_range": self.theorem_range}


@dataclass(frozen=True)
class PeriodizationConfig:
    tail_log_tol: float = -36.0
    max_shell: int = 64

    def __post_init__(self):
        if self.tail_log_tol > -30.0:
            raise ParameterRangeError(f"tail_log_tol must be <= -30, got {self.tail_log_tol}")
        if int(self.max_shell) < 2:
            raise ParameterRangeError(f"max_shell must be >= 2, got {self.max_shell}")

    @classmethod
    def from_config(cls, config: Optional[Dict[str, Any]]) -> "PeriodizationConfig":
        section = (config or {}).get("periodization", {})
        return cls(tail_log_tol=float(section.get("tail_log_tol", -36.0)),
                   max_shell=int(section.get("max_shell", 64)))


DEFAULT_PERIODIZATION = PeriodizationConfig()


def as_points(x: ArrayLike, dim: int) -> Tuple[np.ndarray, Tuple[int, ...]]:
    """Flatten ``x`` to an (n, dim) array and return the leading shape to restore."""
    arr = np.asarray(x, dtype=float)
    if dim == 1 and not (arr.ndim >= 2 and arr.shape[-1] == 1):
        return arr.reshape(-1, 1), arr.shape
    if arr.ndim == 0 or arr.shape[-1] != dim:
        raise DomainError(f"expected points with trailing dimension {dim}, got shape {arr.shape}")
    return arr.reshape(-1, dim), arr.shape[:-1]


def restore_shape(values: np.ndarray, shape: Tuple[int, ...]) -> ArrayLike:
    if shape == ():
        return float(values[0])
    return values.reshape(shape)


def phi_eval(params: MultiquadricParams, x: ArrayLike) -> ArrayLike:
    """(|x|^2 + c^2)^alpha."""
    pts, shape = as_points(x, params.dim)
    r2 = np.einsum("ij,ij->i", pts, pts)
    return restore_shape(np.power(r2 + params.c * params.c, params.alpha), shape)


@lru_cache(maxsize=None)
def transform_prefactor(params: MultiquadricParams) -> SignedLogValue:
    """2^(1+alpha) / Gamma(-alpha)."""
    power = SignedLogValue(1, (1.0 + params.alpha) * _LOG_2)
    return power * log_gamma_signed(-params.alpha).reciprocal()


def global_sign(params: MultiquadricParams) -> int:
    return transform_prefactor(params).sign


@lru_cache(maxsize=None)
def _log_radial_at_zero(params: MultiquadricParams) -> float:
    order = params.nu
    if order > -1e-6:
        return math.inf
    mu = -order
    c = params.c
    return (transform_prefactor(params).log_abs + log_gamma_signed(mu).log_abs
            + (mu - 1.0) * _LOG_2 - 2.0 * mu * math.log(c))


def _log_radial(params: MultiquadricParams, r: np.ndarray) -> np.ndarray:
    """log|phi_hat| at radii r >= 0, with the r -> 0 limit (+inf when nu >= 0)."""
    r = np.asarray(r, dtype=float)
    out = np.empty_like(r)
    pos = r > 0.0
    if pos.any():
        rp = r[pos]
        out[pos] = (transform_prefactor(params).log_abs
                    + params.nu * (math.log(params.c) - np.log(rp))
                    + log_bessel_k(abs(params.nu), params.c * rp))
    if not pos.all():
        out[~pos] = _log_radial_at_zero(params)
    return out


def log_abs_phi_hat(params: MultiquadricParams, r: ArrayLike) -> ArrayLike:
    """log|phi_hat(xi)| at radius r = |xi| > 0; the sign is global_sign(params)."""
    arr = np.asarray(r, dtype=float)
    if arr.size and not np.all(arr > 0.0):
        raise DomainError("log_abs_phi_hat requires r > 0")
    out = _log_radial(params, np.atleast_1d(arr))
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


@lru_cache(maxsize=256)
def lattice_shell(dim: int, k: int) -> np.ndarray:
    """Integer vectors j with |j|_inf == k, in lexicographic order."""
    if k == 0:
        return np.zeros((1, dim), dtype=np.int64)
    axis = np.arange(-k, k + 1)
    grid = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    shell = grid[np.max(np.abs(grid), axis=1) == k]
    shell.setflags(write=False)
    return shell


def _shell_contribution(params, pts, g0, offsets):
    out = np.empty(len(pts))
    step = max(1, _CHUNK_TERMS // len(offsets))
    for start in range(0, len(pts), step):
        block = pts[start:start + step]
        r = np.linalg.norm(block[:, None, :] + offsets[None, :, :], axis=-1)
        g = _log_radial(params, r.ravel()).reshape(r.shape)
        with np.errstate(invalid="ignore", over="ignore"):
            terms = np.exp(g - g0[start:start + step, None])
        out[start:start + step] = terms.sum(axis=1)
    return out


def _s_sum_points(params: MultiquadricParams, pts: np.ndarray, period: float,
                  cfg: PeriodizationConfig) -> np.ndarray:
    g0 = _log_radial(params, np.linalg.norm(pts, axis=1))
    total = np.zeros(len(pts))
    active = np.ones(len(pts), dtype=bool)
    for k in range(1, cfg.max_shell + 1):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            return total
        offsets = lattice_shell(params.dim, k) * period
        contrib = _shell_contribution(params, pts[idx], g0[idx], offsets)
        total[idx] += contrib
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.log(contrib) - np.log(total[idx])
        done = (contrib == 0.0) | (rel <= cfg.tail_log_tol)
        active[idx[done]] = False
    if active.any():
        raise TruncationError(
            f"lattice sum not converged after {cfg.max_shell} shells at {int(active.sum())} points")
    return total


def s_sum(params: MultiquadricParams, xi: ArrayLike, period: float = TWO_PI,
          cfg: Optional[PeriodizationConfig] = None) -> ArrayLike:
    """sum_{j != 0} phi_hat(xi + period*j) / phi_hat(xi) for xi in the closed cell."""
    cfg = cfg or DEFAULT_PERIODIZATION
    pts, shape = as_points(xi, params.dim)
    half = 0.5 * period
    if np.any(np.abs(pts) > half * (1.0 + 1e-12)):
        raise DomainError(f"s_sum requires xi inside [-{half}, {half}]^d")
    return restore_shape(_s_sum_points(params, pts, period, cfg), shape)


def fold(pts: np.ndarray, period: float) -> Tuple[np.ndarray, np.ndarray]:
    """Split points into (cell index, representative in the fundamental cell)."""
    j0 = np.rint(pts / period)
    return j0, pts - period * j0


def cardinal_spectrum(params: MultiquadricParams, xi: ArrayLike,
                      cfg: Optional[PeriodizationConfig] = None,
                      period: float = TWO_PI) -> ArrayLike:
    """L_hat(xi) = phi_hat(xi) / sum_j phi_hat(xi + period*j), any xi."""
    cfg = cfg or DEFAULT_PERIODIZATION
    pts, shape = as_points(xi, params.dim)
    j0, folded = fold(pts, period)
    s = _s_sum_points(params, folded, period, cfg)
    out = 1.0 / (1.0 + s)

    outside = np.any(j0 != 0.0, axis=1)
    if outside.any():
        lx = _log_radial(params, np.linalg.norm(pts[outside], axis=1))
        lf = _log_radial(params, np.linalg.norm(folded[outside], axis=1))
        with np.errstate(invalid="ignore"):
            ratio = np.exp(lx - lf)
        out[outside] *= np.where(np.isinf(lf), 0.0, ratio)
    return restore_shape(out, shape)


def periodic_symbol_P(params: MultiquadricParams, xi: ArrayLike,
                      cfg: Optional[PeriodizationConfig] = None) -> ArrayLike:
    """1 / sum_j phi_hat(xi + 2 pi j), printed normalization of phi_hat."""
    if not params.decaying_range:
        raise ParameterRangeError(
            f"periodic symbol needs alpha < -d - 1/2, got alpha={params.alpha}, d={params.dim}")
    cfg = cfg or DEFAULT_PERIODIZATION
    pts, shape = as_points(xi, params.dim)
    _, folded = fold(pts, TWO_PI)
    s = _s_sum_points(params, folded, TWO_PI, cfg)
    lf = _log_radial(params, np.linalg.norm(folded, axis=1))
    return restore_shape(np.exp(-lf - np.log1p(s)), shape)


def poisson_s_closed_form(xi: ArrayLike, c: float = 1.0, period: float = TWO_PI) -> ArrayLike:
    """Geometric-series value of s for the univariate Poisson kernel (alpha = -1)."""
    x = np.asarray(xi, dtype=float)
    return np.exp(c * np.abs(x)) * 2.0 * np.cosh(c * x) / np.expm1(c * period)


def poisson_spectrum_closed_form(xi: ArrayLike, c: float = 1.0, period: float = TWO_PI) -> ArrayLike:
    x = np.asarray(xi, dtype=float)
    xf = x - period * np.rint(x / period)
    spectrum = np.exp(-c * (np.abs(x) - np.abs(xf))) / (1.0 + poisson_s_closed_form(xf, c, period))
    return float(spectrum) if spectrum.ndim == 0 else spectrum
