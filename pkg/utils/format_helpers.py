import logging
import math
from typing import Sequence, Union

logger = logging.getLogger(__name__)

JSON_DIGITS = 17
CSV_DIGITS = 12


def format_float(value: Union[float, int, None], digits: int = CSV_DIGITS) -> str:
    """Fixed-significance formatting; non-finite values get stable spellings."""
    if value is None:
        return ""
    try:
        value = float(value)
    except (TypeError, ValueError) as e:
        logger.warning(f"Error formatting value '{value}': {str(e)}")
        return ""
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.{digits}g}"


def format_csv_float(value: Union[float, int, None]) -> str:
    return format_float(value, CSV_DIGITS)


def format_json_float(value: Union[float, int, None]) -> Union[float, str, None]:
    """Round-trip-exact float for JSON; non-finite values become strings."""
    if value is None:
        return None
    value = float(value)
    if not math.isfinite(value):
        return format_float(value)
    return float(f"{value:.{JSON_DIGITS}g}")


def format_multi_index(gamma: Sequence[int]) -> str:
    return "(" + ",".join(str(int(g)) for g in gamma) + ")"


def format_pass(flag: bool) -> str:
    return "PASS" if flag else "FAIL"
