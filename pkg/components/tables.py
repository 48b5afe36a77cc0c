import hashlib
import io
import json
import logging
import os
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

from components.cardinal import CardinalTable, SynthesisBudget, synthesize
from components.kernel import DEFAULT_PERIODIZATION, MultiquadricParams, PeriodizationConfig
from components.reports import ReportGenerator
from utils.errors import ConfigError

logger = logging.getLogger(__name__)

TABLE_FORMAT_VERSION = 1
_HEADER_FIELDS = ("alpha", "c", "dim", "spatial_step", "spatial_radius", "fourier_cutoff",
                  "alias_period", "accuracy_estimate", "target_accuracy", "shape")


class TableComponent:
    """Export, import and caching of cardinal tables."""

    @staticmethod
    def _header(table: CardinalTable) -> Dict[str, Any]:
        return {
            "alpha": table.params.alpha,
            "c": table.params.c,
            "dim": table.params.dim,
            "spatial_step": table.spatial_step,
            "spatial_radius": table.spatial_radius,
            "fourier_cutoff": table.fourier_cutoff,
            "alias_period": table.alias_period,
            "accuracy_estimate": table.accuracy_estimate,
            "target_accuracy": table.target_accuracy,
            "shape": "x".join(str(n) for n in table.samples.shape),
        }

    @staticmethod
    def _from_header(header: Dict[str, str], samples: np.ndarray,
                     error_parts: Optional[Dict[str, float]] = None) -> CardinalTable:
        missing = [k for k in _HEADER_FIELDS if k not in header]
        if missing:
            raise ConfigError(f"table header is missing {missing}")
        shape = tuple(int(n) for n in str(header["shape"]).split("x"))
        params = MultiquadricParams(float(header["alpha"]), float(header["c"]), int(header["dim"]))
        return CardinalTable(
            params=params,
            spatial_step=float(header["spatial_step"]),
            spatial_radius=float(header["spatial_radius"]),
            samples=np.ascontiguousarray(samples, dtype=float).reshape(shape),
            fourier_cutoff=float(header["fourier_cutoff"]),
            alias_period=float(header["alias_period"]),
            accuracy_estimate=float(header["accuracy_estimate"]),
            target_accuracy=float(header["target_accuracy"]),
            error_parts=dict(error_parts or {}),
        )

    @staticmethod
    def export_csv(table: CardinalTable, path: str) -> str:
        """Header lines '# key=value' followed by row-major samples."""
        lines = [f"# {key}={value!r}" if isinstance(value, float) else f"# {key}={value}"
                 for key, value in TableComponent._header(table).items()]
        body = pd.DataFrame({"value": table.samples.ravel()}).to_csv(index=False, float_format="%.17g")
        ReportGenerator.write_atomic(path, "\n".join(lines) + "\n" + body)
        logger.info(f"Exported cardinal table {table.samples.shape} to {path}")
        return path

    @staticmethod
    def import_csv(path: str) -> CardinalTable:
        header: Dict[str, str] = {}
        with open(path, "r") as f:
            for line in f:
                if not line.startswith("#"):
                    break
                key, _, value = line[1:].strip().partition("=")
                header[key.strip()] = value.strip()
        df = pd.read_csv(path, comment="#", dtype={"value": float}, float_precision="round_trip")
        return TableComponent._from_header(header, df["value"].to_numpy())

    @staticmethod
    def save_npz(table: CardinalTable, path: str) -> str:
        meta = json.dumps({"header": TableComponent._header(table),
                           "error_parts": table.error_parts,
                           "format_version": TABLE_FORMAT_VERSION})
        buffer = io.BytesIO()
        np.savez(buffer, samples=table.samples, meta=np.array(meta))
        ReportGenerator.write_atomic(path, buffer.getvalue())
        return path

    @staticmethod
    def load_npz(path: str) -> CardinalTable:
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            samples = np.array(data["samples"])
        header = {k: v for k, v in meta["header"].items()}
        return TableComponent._from_header(header, samples, meta.get("error_parts"))


class TableCache:
    """Hash-keyed on-disk cache of synthesized tables."""

    def __init__(self, cache_dir: Optional[str], cfg: Optional[PeriodizationConfig] = None,
                 budget: Optional[SynthesisBudget] = None):
        self.cache_dir = cache_dir
        self.cfg = cfg or DEFAULT_PERIODIZATION
        self.budget = budget or SynthesisBudget()
        self.hits = 0
        self.misses = 0
        if cache_dir:
            os.makedirs(cache_dir, exist_ok=True)

    def key(self, params: MultiquadricParams, target_accuracy: float, spatial_radius: float) -> str:
        payload = json.dumps({
            "alpha": repr(params.alpha), "c": repr(params.c), "dim": params.dim,
            "accuracy": repr(float(target_accuracy)), "radius": repr(float(spatial_radius)),
            "tail_log_tol": repr(self.cfg.tail_log_tol), "max_shell": self.cfg.max_shell,
            "version": TABLE_FORMAT_VERSION,
        }, sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def path_for(self, key: str) -> Optional[str]:
        if not self.cache_dir:
            return None
        return os.path.join(self.cache_dir, f"cardinal_{key[:32]}.npz")

    def get_or_synthesize(self, params: MultiquadricParams, target_accuracy: float,
                          spatial_radius: float) -> CardinalTable:
        path = self.path_for(self.key(params, target_accuracy, spatial_radius))
        if path and os.path.exists(path):
            try:
                table = TableComponent.load_npz(path)
                self.hits += 1
                logger.info(f"Cache hit for alpha={params.alpha}, c={params.c}, d={params.dim}")
                return table
            except Exception as e:
                logger.warning(f"Discarding unreadable cache entry {path}: {str(e)}")

        self.misses += 1
        table = synthesize(params, target_accuracy, spatial_radius, self.cfg, self.budget)
        if path:
            TableComponent.save_npz(table, path)
            logger.info(f"Cached table for alpha={params.alpha}, c={params.c}, d={params.dim} at {path}")
        return table
