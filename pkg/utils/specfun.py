"""Real-argument special functions: Gamma, signed log-Gamma and Bessel K.

Everything downstream of the kernel works with ratios of transforms that
underflow in linear scale, so the log forms are the primary entry points.
"""
import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from numpy.polynomial import polynomial as npoly

from utils.errors import DomainError, PoleError, TruncationError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

EPS = float(np.finfo(float).eps)
NEAR_INTEGER_ORDER = 1e-6
MAX_ITERATIONS = 10000

_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)

# Taylor coefficients of 1/Gamma(1 + x) in powers of x.
_RGAMMA_COEF = np.array([
    1.0000000000000000,
    0.5772156649015329,
    -0.6558780715202538,
    -0.0420026350340952,
    0.1665386113822915,
    -0.0421977345555443,
    -0.0096219715278770,
    0.0072189432466630,
    -0.0011651675918591,
    -0.0002152416741149,
    0.0001280502823882,
    -0.0000201348547807,
    -0.0000012504934821,
    0.0000011330272320,
    -0.0000002056338417,
    0.0000000061160950,
    0.0000000050020075,
    -0.0000000011812746,
    0.0000000001043427,
    0.0000000000077823,
    -0.0000000000036968,
    0.0000000000005100,
    -0.0000000000000206,
    -0.0000000000000054,
    0.0000000000000014,
    0.0000000000000001,
])
# gam1(mu) = -sum over odd-power coefficients, re-indexed as a series in mu**2.
_GAM1_COEF = -_RGAMMA_COEF[1::2]


@dataclass(frozen=True)
class SignedLogValue:
    """A real number stored as sign and log of its magnitude."""
    sign: int
    log_abs: float

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or +1, got {self.sign}")
        if (self.sign == 0) != (self.log_abs == -math.inf):
            raise ValueError("sign 0 must pair with log_abs = -inf")

    def __mul__(self, other: "SignedLogValue") -> "SignedLogValue":
        sign = self.sign * other.sign
        if sign == 0:
            return SignedLogValue.zero()
        return SignedLogValue(sign, self.log_abs + other.log_abs)

    def reciprocal(self) -> "SignedLogValue":
        if self.sign == 0:
            raise ZeroDivisionError("reciprocal of zero")
        return SignedLogValue(self.sign, -self.log_abs)

    @property
    def value(self) -> float:
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.log_abs)

    @classmethod
    def zero(cls) -> "SignedLogValue":
        return cls(0, -math.inf)

    @classmethod
    def from_float(cls, x: float) -> "SignedLogValue":
        if x == 0:
            return cls.zero()
        return cls(1 if x > 0 else -1, math.log(abs(x)))


def _lanczos_log_gamma(x: float) -> float:
    """log Gamma(x) for x >= 0.5."""
    z = x - 1.0
    acc = _LANCZOS_COEF[0]
    for i in range(1, len(_LANCZOS_COEF)):
        acc += _LANCZOS_COEF[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    return 0.5 * math.log(2.0 * math.pi) + (z + 0.5) * math.log(t) - t + math.log(acc)


def log_gamma_signed(x: float) -> SignedLogValue:
    """Gamma(x) as (sign, log|Gamma(x)|), safe against overflow."""
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"Gamma argument must be finite, got {x}")
    if x <= 0.0 and x == math.floor(x):
        raise PoleError(f"Gamma has a pole at {x}")

    if x >= 1.0 and x == math.floor(x) and x <= 171.0:
        return SignedLogValue(1, math.log(math.factorial(int(x) - 1)))
    if x >= 0.5:
        return SignedLogValue(1, _lanczos_log_gamma(x))

    # Reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x), with 1 - x > 0.5.
    n = round(x)
    s = math.sin(math.pi * (x - n))
    if n % 2:
        s = -s
    log_abs = math.log(math.pi) - math.log(abs(s)) - _lanczos_log_gamma(1.0 - x)
    return SignedLogValue(1 if s > 0 else -1, log_abs)


def gamma(x: float) -> float:
    return log_gamma_signed(x).value


def _rgamma_parts(mu: float):
    """1/Gamma(1+mu), 1/Gamma(1-mu) and the Temme combinations gam1, gam2."""
    gampl = float(npoly.polyval(mu, _RGAMMA_COEF))
    gammi = float(npoly.polyval(-mu, _RGAMMA_COEF))
    gam1 = float(npoly.polyval(mu * mu, _GAM1_COEF))
    gam2 = 0.5 * (gammi + gampl)
    return gam1, gam2, gampl, gammi


def _temme_series(mu: float, x: np.ndarray):
    """K_mu(x) and K_{mu+1}(x) for |mu| <= 1/2 and 0 < x <= 2."""
    gam1, gam2, gampl, gammi = _rgamma_parts(mu)
    x2 = 0.5 * x
    pimu = math.pi * mu
    fact = 1.0 if abs(pimu) < EPS else pimu / math.sin(pimu)
    d = -np.log(x2)
    e = mu * d
    with np.errstate(invalid="ignore", divide="ignore"):
        fact2 = np.where(np.abs(e) < EPS, 1.0, np.sinh(e) / e)
    ff = fact * (gam1 * np.cosh(e) + gam2 * fact2 * d)
    total = ff.copy()
    e = np.exp(e)
    p = 0.5 * e / gampl
    q = 0.5 / (e * gammi)
    c = np.ones_like(x)
    d = x2 * x2
    total1 = p.copy()
    for i in range(1, MAX_ITERATIONS + 1):
        ff = (i * ff + p + q) / (i * i - mu * mu)
        c = c * d / i
        p = p / (i - mu)
        q = q / (i + mu)
        delta = c * ff
        total += delta
        total1 += c * (p - i * ff)
        if np.all(np.abs(delta) < np.abs(total) * EPS):
            break
    else:
        raise TruncationError(f"Bessel K series did not converge for mu={mu}")
    return total, total1 * 2.0 / x


def _steed_cf2(mu: float, x: np.ndarray):
    """exp(x)-scaled K_mu(x) and K_{mu+1}(x) for |mu| <= 1/2 and x > 2."""
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1 = np.zeros_like(x)
    q2 = np.ones_like(x)
    a1 = 0.25 - mu * mu
    q = np.full_like(x, a1)
    c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, MAX_ITERATIONS + 1):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1 = q2
        q2 = qnew
        q = q + c * qnew
        b = b + 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h = h + delh
        dels = q * delh
        s = s + dels
        if np.all(np.abs(dels) < np.abs(s) * EPS):
            break
    else:
        raise TruncationError(f"Bessel K continued fraction did not converge for mu={mu}")
    h = a1 * h
    kmu = np.sqrt(np.pi / (2.0 * x)) / s
    kmu1 = kmu * (mu + x + 0.5 - h) / x
    return kmu, kmu1


def log_bessel_k(nu: float, z: ArrayLike) -> ArrayLike:
    """Natural log of K_nu(z) for nu >= 0 and z > 0, vectorized over z.

    Temme's series is used for z <= 2 and Steed's continued fraction above,
    both at the reduced order |mu| <= 1/2, followed by upward recurrence
    carried as ratios K_{k+1}/K_k so no intermediate value overflows.
    """
    nu = float(nu)
    if not math.isfinite(nu) or nu < 0.0:
        raise DomainError(f"Bessel K order must be finite and >= 0, got {nu}")
    arr = np.asarray(z, dtype=float)
    zz = np.atleast_1d(arr).ravel()
    if zz.size and not np.all(np.isfinite(zz) & (zz > 0.0)):
        raise DomainError("Bessel K argument must be finite and > 0")

    nearest = round(nu)
    if abs(nu - nearest) < NEAR_INTEGER_ORDER:
        nu = float(nearest)
    n = int(math.floor(nu + 0.5))
    mu = nu - n

    log_k = np.empty_like(zz)
    ratio = np.empty_like(zz)
    small = zz <= 2.0
    if small.any():
        kmu, kmu1 = _temme_series(mu, zz[small])
        log_k[small] = np.log(kmu)
        ratio[small] = kmu1 / kmu
    large = ~small
    if large.any():
        kmu, kmu1 = _steed_cf2(mu, zz[large])
        log_k[large] = np.log(kmu) - zz[large]
        ratio[large] = kmu1 / kmu

    for i in range(1, n + 1):
        log_k += np.log(ratio)
        ratio = 2.0 * (mu + i) / zz + 1.0 / ratio

    if arr.ndim == 0:
        return float(log_k[0])
    return log_k.reshape(arr.shape)


def bessel_k(nu: float, z: ArrayLike) -> ArrayLike:
    """K_nu(z); negative orders use K_{-nu} = K_nu."""
    out = np.exp(log_bessel_k(abs(float(nu)), z))
    if np.ndim(out) == 0:
        return float(out)
    return out
