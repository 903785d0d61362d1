"""Deterministic artifact writers (CSV / JSON).

Every writer uses fixed float formatting and fixed column order and
never embeds timestamps, so repeated runs on identical inputs produce
byte-identical files and golden-file testing stays possible.
"""

from __future__ import annotations

import json

import numpy as np

FLOAT_FMT = "%.17e"


def format_float(x: float) -> str:
    return FLOAT_FMT % x


def write_csv(path, header: list[str], columns: list[np.ndarray]) -> None:
    """Column-oriented CSV; all columns must share one length."""
    if len(header) != len(columns):
        raise ValueError("header/column count mismatch")
    n = len(columns[0]) if columns else 0
    for c in columns:
        if len(c) != n:
            raise ValueError("ragged columns")
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(n):
            fh.write(",".join(format_float(float(c[i])) for c in columns)
                     + "\n")


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        fh.write(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False,
                            default=_coerce) + "\n")


def _coerce(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def sanitize(obj):
    """Replace non-finite floats with strings so JSON stays strict."""
    if isinstance(obj, dict):
        return {k: sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if f != f:
            return "nan"
        if f == float("inf"):
            return "inf"
        if f == float("-inf"):
            return "-inf"
        return f
    return obj
