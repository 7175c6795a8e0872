"""Render glacialdde CSV outputs into the standard figures.

Each figure kind consumes the column contract of the producing
subcommand and never alters or reorders the data on the way to the
canvas: tests read the plotted arrays back off the matplotlib artists
and compare them with the files.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("trajectory", "heatmap", "basin", "bifurcation", "phase-contour")

# label raster: dark = small response, light = large response
BASIN_COLORS = ("#1a1a1a", "#e8d9b0")
CONTINUOUS_CMAP = "viridis"


class SchemaError(ValueError):
    """A required column is missing or an input holds no data rows."""


@dataclass
class FigureSpec:
    kind: str
    inputs: list[str | Path]
    output: str | Path
    title: str | None = None
    xlim: tuple[float, float] | None = None
    ylim: tuple[float, float] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; "
                              f"expected one of {', '.join(KINDS)}")
        if not self.inputs:
            raise SchemaError(f"figure kind {self.kind!r} needs input files")


def read_table(path) -> dict[str, np.ndarray]:
    """Read a glacialdde CSV into named columns; empty tables are errors."""
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header:
            raise SchemaError(f"{path}: empty file")
        names = header.split(",")
        rows = []
        for line in fh:
            line = line.strip()
            if line:
                rows.append([_cell(v) for v in line.split(",")])
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    cols = list(zip(*rows))
    return {name: np.asarray(col) for name, col in zip(names, cols)}


def _cell(v: str):
    try:
        return float(v)
    except ValueError:
        return v


def require(table: dict, path, *names) -> None:
    for name in names:
        if name not in table:
            raise SchemaError(f"{path}: missing column {name!r} "
                              f"(found {', '.join(table)})")


def pivot(rows: np.ndarray, cols: np.ndarray, vals: np.ndarray
          ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Long (row, col, value) triples -> grid, keeping first-appearance order."""
    r_unique = rows[np.sort(np.unique(rows, return_index=True)[1])]
    c_unique = cols[np.sort(np.unique(cols, return_index=True)[1])]
    grid = np.full((r_unique.size, c_unique.size), np.nan)
    ri = {v: i for i, v in enumerate(r_unique)}
    ci = {v: j for j, v in enumerate(c_unique)}
    for r, c, v in zip(rows, cols, vals):
        grid[ri[r], ci[c]] = v
    return r_unique, c_unique, grid


def render(spec: FigureSpec):
    """Draw the figure, save it to spec.output, and return the Figure."""
    drawer = {"trajectory": _draw_trajectory,
              "heatmap": _draw_heatmap,
              "basin": _draw_basin,
              "bifurcation": _draw_bifurcation,
              "phase-contour": _draw_phase_contour}[spec.kind]
    fig = drawer(spec)
    if spec.title:
        fig.suptitle(spec.title)
    ax = fig.axes[0]
    if spec.xlim:
        ax.set_xlim(*spec.xlim)
    if spec.ylim:
        ax.set_ylim(*spec.ylim)
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out)
    return fig


def _draw_trajectory(spec: FigureSpec):
    fig, ax = plt.subplots(figsize=(8, 3))
    for path in spec.inputs:
        table = read_table(path)
        require(table, path, "t", "x")
        ax.plot(table["t"], table["x"], lw=0.8, label=Path(path).stem)
    ax.set_xlabel("t (model units)")
    ax.set_ylabel("X")
    if len(spec.inputs) > 1:
        ax.legend(fontsize=8)
    return fig


def _draw_heatmap(spec: FigureSpec):
    table = read_table(spec.inputs[0])
    require(table, spec.inputs[0], "u", "t", "mae")
    u, t, grid = pivot(table["u"], table["t"], table["mae"])
    fig, ax = plt.subplots(figsize=(7, 5))
    mesh = ax.pcolormesh(t, u, grid, cmap=CONTINUOUS_CMAP, shading="nearest")
    mesh.set_gid("heatmap-values")
    fig.colorbar(mesh, ax=ax, label="window distance")
    ax.set_xlabel("t (model units)")
    ax.set_ylabel("forcing amplitude u")
    return fig


def _draw_basin(spec: FigureSpec):
    basin_path = spec.inputs[0]
    table = read_table(basin_path)
    require(table, basin_path, "row", "col", "x1", "x2", "label")
    x1, x2, grid = pivot(table["x1"], table["x2"], table["label"])
    fig, ax = plt.subplots(figsize=(6, 6))
    mesh = ax.pcolormesh(x1, x2, grid.T, cmap=matplotlib.colors.ListedColormap(
        BASIN_COLORS), vmin=0, vmax=1, shading="nearest")
    mesh.set_gid("basin-labels")
    for curve_path in spec.inputs[1:]:
        curve = read_table(curve_path)
        require(curve, curve_path, "xL1", "xL2")
        ax.plot(curve["xL1"], curve["xL2"], color="#2ca02c", lw=1.5,
                label=Path(curve_path).stem)
    sink = spec.meta.get("sink")
    if sink is None and spec.meta.get("meta_path"):
        with open(spec.meta["meta_path"], "r", encoding="utf-8") as fh:
            sink = json.load(fh).get("sink")
    if sink is not None:
        ax.plot([sink[0]], [sink[1]], marker="o", color="#2ca02c", ms=8,
                mec="white", gid="sink-marker")
    ax.set_xlabel("x1 (head value)")
    ax.set_ylabel("x2 (delayed value)")
    return fig


def _draw_bifurcation(spec: FigureSpec):
    table = read_table(spec.inputs[0])
    require(table, spec.inputs[0], "tau", "orbit_min", "orbit_max")
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(table["tau"], table["orbit_max"], ".-", ms=4, lw=0.7,
            label="orbit max")
    ax.plot(table["tau"], table["orbit_min"], ".-", ms=4, lw=0.7,
            label="orbit min")
    if len(spec.inputs) > 1:
        br = read_table(spec.inputs[1])
        require(br, spec.inputs[1], "tau_lo", "tau_hi")
        for lo, hi in zip(np.atleast_1d(br["tau_lo"]), np.atleast_1d(br["tau_hi"])):
            ax.axvspan(lo, hi, color="red", alpha=0.4)
    ax.set_xlabel("delay tau")
    ax.set_ylabel("X extrema over one orbit")
    ax.legend(fontsize=8)
    return fig


def _draw_phase_contour(spec: FigureSpec):
    table = read_table(spec.inputs[0])
    require(table, spec.inputs[0], "phi", "tau", "u_threshold")
    phi, tau, grid = pivot(table["phi"], table["tau"], table["u_threshold"])
    fig, ax = plt.subplots(figsize=(6, 5))
    mesh = ax.pcolormesh(tau, phi, grid, cmap=CONTINUOUS_CMAP,
                         shading="nearest")
    mesh.set_gid("threshold-values")
    fig.colorbar(mesh, ax=ax, label="threshold amplitude u")
    ax.set_xlabel("delay tau")
    ax.set_ylabel("forcing phase phi")
    return fig
