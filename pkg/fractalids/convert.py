"""Perform data conversions."""

import dataclasses
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np


def path_to_string(path_name: Path, levels: int = 4) -> str:
    """Convert the path to an elided version of the path as a string."""
    parts = path_name.parts
    # the first part is always the root, hence the - 1
    if len(parts) - 1 > levels:
        start_index = len(parts) - levels
        return Path("<...>", *parts[start_index:]).as_posix()
    return path_name.as_posix()


def format_float(value: float) -> str:
    """Format a float so that it reads back to the same value."""
    return repr(float(value))


def to_serializable(value: Any) -> Any:  # noqa: PLR0911
    """Convert numbers, arrays and records into plain JSON values."""
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, (np.integer, np.bool_)):
        return value.item()
    if isinstance(value, (float, np.floating)):
        value = float(value)
        # json has no infinities or nan; keep them readable
        if not np.isfinite(value):
            return str(value)
        return value
    if isinstance(value, np.ndarray):
        return [to_serializable(item) for item in value.tolist()]
    if isinstance(value, Path):
        return value.as_posix()
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {
            field.name: to_serializable(getattr(value, field.name))
            for field in dataclasses.fields(value)
        }
    if isinstance(value, dict):
        return {str(key): to_serializable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple, set, frozenset)):
        items = sorted(value) if isinstance(value, (set, frozenset)) else value
        return [to_serializable(item) for item in items]
    return value
