"""Output formatting utilities for idg-lab."""

import json
import math
from pathlib import Path
from typing import Any

import pandas as pd
from pydantic import BaseModel

from idg_lab.constants import CSV_FLOAT_FORMAT

INF_SENTINEL = "inf"


def encode_extended(value: float) -> float | str:
    """Encode an extended real, using the string sentinel for +infinity."""
    if math.isinf(value) and value > 0:
        return INF_SENTINEL
    return value


def decode_extended(value: Any) -> Any:
    """Inverse of :func:`encode_extended`; other values pass through."""
    if isinstance(value, str) and value.strip().lower() in (INF_SENTINEL, "+inf", "infinity"):
        return math.inf
    return value


def _jsonable(data: Any) -> Any:
    if isinstance(data, BaseModel):
        return data.model_dump(mode="json")
    return data


def format_json(data: Any, indent: int = 2) -> str:
    """Format data as JSON string.

    Args:
        data: Data to format (pydantic models are dumped first)
        indent: Number of spaces for indentation

    Returns:
        Formatted JSON string
    """
    return json.dumps(_jsonable(data), indent=indent, ensure_ascii=False, sort_keys=True)


def print_json(data: Any, indent: int = 2) -> None:
    """Print data as formatted JSON.

    Args:
        data: Data to print
        indent: Number of spaces for indentation
    """
    print(format_json(data, indent=indent))


def write_json(path: Path, data: Any, indent: int = 2) -> Path:
    """Write data as formatted JSON, creating parent directories."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_json(data, indent=indent) + "\n", encoding="utf-8")
    return path


def write_table(path: Path, frame: pd.DataFrame) -> Path:
    """Write a table as CSV with a fixed float format."""
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    return path
