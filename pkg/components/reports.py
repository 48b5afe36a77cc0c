import io
import json
import logging
import os
import tempfile
from typing import Any, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from utils.format_helpers import CSV_DIGITS, format_json_float

logger = logging.getLogger(__name__)

CONVERGENCE_COLUMNS = ("alpha", "dim", "p", "family", "k", "h", "error", "eoc", "runtime_ms")


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return format_json_float(float(obj))
    return obj


class ReportGenerator:
    @staticmethod
    def generate_json_report(result: Mapping[str, Any], config_echo: Mapping[str, Any]) -> str:
        """JSON document with the run configuration echoed under 'config'."""
        document = {"config": _jsonable(config_echo), "result": _jsonable(result)}
        return json.dumps(document, indent=2, sort_keys=False) + "\n"

    @staticmethod
    def generate_csv_report(rows: Sequence[Mapping[str, Any]], columns: Sequence[str],
                            config_echo: Optional[Mapping[str, Any]] = None) -> str:
        """CSV with '# key: value' config header lines and fixed column order."""
        buffer = io.StringIO()
        if config_echo:
            for key, value in config_echo.items():
                buffer.write(f"# {key}: {json.dumps(_jsonable(value), sort_keys=True)}\n")
        df = pd.DataFrame(list(rows), columns=list(columns))
        df.to_csv(buffer, index=False, float_format=f"%.{CSV_DIGITS}g", lineterminator="\n")
        return buffer.getvalue()

    @staticmethod
    def csv_body(text: str) -> str:
        """The CSV without its comment header."""
        return "".join(line for line in text.splitlines(keepends=True) if not line.startswith("#"))

    @staticmethod
    def write_atomic(path: str, content: Union[str, bytes]) -> str:
        """Write to a temporary file in the target directory, then rename."""
        directory = os.path.dirname(os.path.abspath(path)) or "."
        os.makedirs(directory, exist_ok=True)
        mode = "wb" if isinstance(content, bytes) else "w"
        fd, tmp_path = tempfile.mkstemp(prefix=".tmp_", dir=directory)
        try:
            with os.fdopen(fd, mode) as f:
                f.write(content)
            os.replace(tmp_path, path)
        except Exception as e:
            logger.error(f"Error writing {path}: {str(e)}")
            if os.path.exists(tmp_path):
                os.remove(tmp_path)
            raise
        logger.info(f"Wrote {path}")
        return path

    @staticmethod
    def emit(content: str, path: Optional[str]) -> None:
        """Atomic write when a path is given, stdout otherwise."""
        if path and path != "-":
            ReportGenerator.write_atomic(path, content)
        else:
            print(content, end="")
