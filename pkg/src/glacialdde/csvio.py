"""CSV writers shared by the command-line workflows.

Numbers are emitted with 17 significant digits so files round-trip
float64 exactly and downstream regression comparisons stay meaningful.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np


def fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    f = float(v)
    if math.isnan(f):
        return "nan"
    return format(f, ".17g")


def write_csv(path, header: list[str], rows) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """Read back a file written by write_csv (numeric columns only)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        data = [line.strip().split(",") for line in fh if line.strip()]
    arr = np.array([[float(v) for v in row] for row in data]) if data else \
        np.empty((0, len(header)))
    return header, arr
