import logging
import math
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from utils.errors import FitError

logger = logging.getLogger(__name__)


class DataProcessor:
    """Numeric post-processing shared by the decay, scaling and convergence fits."""

    @staticmethod
    def loglog_slope(points: Iterable[Tuple[float, float]]) -> Tuple[float, float]:
        """Least-squares slope of log y against log x, with the residual norm."""
        pts = [(float(x), float(y)) for x, y in points]
        if len(pts) < 3:
            raise FitError(f"log-log fit needs at least 3 points, got {len(pts)}")
        xs = np.array([p[0] for p in pts])
        ys = np.array([p[1] for p in pts])
        if np.any(xs <= 0) or np.any(ys <= 0) or not np.all(np.isfinite(xs * ys)):
            raise FitError("log-log fit needs finite positive coordinates")
        lx = np.log(xs)
        ly = np.log(ys)
        if np.unique(lx).size < 2 or np.ptp(lx) <= 1e-12 * max(1.0, np.max(np.abs(lx))):
            raise FitError("degenerate abscissae in log-log fit")

        design = np.column_stack([lx, np.ones_like(lx)])
        coef, *_ = np.linalg.lstsq(design, ly, rcond=None)
        residual = float(np.linalg.norm(design @ coef - ly))
        return float(coef[0]), residual

    @staticmethod
    def eoc(e_coarse: float, e_fine: float, h_coarse: float, h_fine: float) -> float:
        if e_coarse <= 0 or e_fine <= 0:
            return math.nan
        return math.log(e_coarse / e_fine) / math.log(h_coarse / h_fine)

    @staticmethod
    def eoc_pairs(h_values: Sequence[float], errors: Sequence[float]) -> List[Tuple[float, float, float]]:
        """(h_i, h_{i+1}, local order) for consecutive entries."""
        pairs = []
        for i in range(len(h_values) - 1):
            order = DataProcessor.eoc(errors[i], errors[i + 1], h_values[i], h_values[i + 1])
            pairs.append((float(h_values[i]), float(h_values[i + 1]), order))
        return pairs

    @staticmethod
    def outer_envelope(values: np.ndarray) -> np.ndarray:
        """Running maximum of |values| taken from the far end inwards."""
        mags = np.abs(np.asarray(values, dtype=float))
        return np.maximum.accumulate(mags[::-1])[::-1]

    @staticmethod
    def compensated_sum(values: Iterable[float]) -> float:
        return math.fsum(float(v) for v in values)

    @staticmethod
    def count_inversions(errors: Sequence[float], tolerance: float = 0.05) -> Tuple[int, int]:
        """Number of increases along the sequence, and how many exceed ``tolerance`` relative."""
        increases = 0
        large = 0
        for prev, cur in zip(errors[:-1], errors[1:]):
            if cur > prev:
                increases += 1
                if cur > prev * (1.0 + tolerance):
                    large += 1
        return increases, large
