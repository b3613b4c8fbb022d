"""Results-CSV access.

plotkit consumes only the fixed results contract: a CSV whose header
names the fields to plot. Numeric fields are parsed as floats; every
referenced field must exist in the header.
"""
from __future__ import annotations

import csv
from pathlib import Path


class DataError(Exception):
    pass


def read_table(path) -> list[dict[str, str]]:
    path = Path(path)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames:
            raise DataError(f"{path}: empty CSV")
        rows = list(reader)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return rows


def column(rows: list[dict[str, str]], field: str, path="results") -> list[float]:
    if field not in rows[0]:
        raise DataError(f"{path}: no field named {field!r} (have {sorted(rows[0])})")
    try:
        return [float(row[field]) for row in rows]
    except ValueError as exc:
        raise DataError(f"{path}: field {field!r} is not numeric: {exc}") from exc


def least_squares(xs: list[float], ys: list[float]) -> tuple[float, float]:
    """Slope and intercept, recomputed from the data being drawn."""
    n = len(xs)
    if n < 2:
        raise DataError("need at least 2 points for a trendline")
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    sxx = sum((x - mean_x) ** 2 for x in xs)
    if sxx == 0.0:
        raise DataError("x values are constant; trendline is undefined")
    sxy = sum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys))
    slope = sxy / sxx
    return slope, mean_y - slope * mean_x


def bin_indices(values: list[float], edges: list[float]) -> list[int]:
    """Half-open bins: bin k holds edges[k-1] <= v < edges[k]."""
    if edges != sorted(edges) or len(set(edges)) != len(edges):
        raise DataError("bin edges must be strictly ascending")
    out = []
    for v in values:
        for k, edge in enumerate(edges):
            if v < edge:
                out.append(k)
                break
        else:
            raise DataError(f"value {v} above the last bin edge {edges[-1]}")
    return out
