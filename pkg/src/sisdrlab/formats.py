"""Value formatting shared by all CSV/JSON writers and their loaders.

dB columns are rendered with 6 decimal places; infinities as the literals
"+inf"/"-inf" and undefined values as "nan", identically in CSV and JSON so
every table the tool writes can be read back by float().
"""

from __future__ import annotations

import math

__all__ = [
    "format_db",
    "parse_db",
    "format_float",
    "parse_optional_float",
    "json_safe",
    "json_restore",
]


def format_db(value: float) -> str:
    value = float(value)
    if math.isnan(value):
        return "nan"
    if value == math.inf:
        return "+inf"
    if value == -math.inf:
        return "-inf"
    return f"{value:.6f}"


def parse_db(text: str) -> float:
    return float(text)  # float() accepts "+inf", "-inf" and "nan"


def format_float(value: float) -> str:
    """Full-precision rendering for gains and scalings (repr round-trips)."""
    return repr(float(value))


def parse_optional_float(text: str) -> float | None:
    return float(text) if text != "" else None


def json_safe(value: float | None) -> float | str | None:
    """Numbers stay numbers; non-finite floats become their string literals."""
    if value is None:
        return None
    value = float(value)
    if math.isnan(value):
        return "nan"
    if value == math.inf:
        return "+inf"
    if value == -math.inf:
        return "-inf"
    return value


def json_restore(value: float | int | str | None) -> float | None:
    if value is None:
        return None
    return float(value)
