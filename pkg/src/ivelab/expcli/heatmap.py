"""Plain-text PGM (``P2``) heatmaps with per-figure min-max normalisation."""

from __future__ import annotations

from pathlib import Path

import numpy as np

MAXVAL = 255


def normalise(values) -> np.ndarray:
    """Map to [0, 1] by min-max; a constant grid maps to zeros."""
    values = np.asarray(values, dtype=float)
    lo, hi = values.min(), values.max()
    if hi == lo:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def intensities(values) -> np.ndarray:
    # round half up
    return np.floor(normalise(values) * MAXVAL + 0.5).astype(int)


def heatmap_text(grid) -> str:
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise ValueError("heatmap grid is empty")
    pixels = intensities(grid)
    height, width = pixels.shape
    lines = ["P2", f"{width} {height}", str(MAXVAL)]
    lines += [" ".join(str(p) for p in row) for row in pixels]
    return "\n".join(lines) + "\n"


def write_heatmap(grid, path) -> None:
    Path(path).write_text(heatmap_text(grid))


def read_heatmap(path) -> np.ndarray:
    """Pixel values scaled back to [0, 1]."""
    tokens = Path(path).read_text().split()
    if tokens[0] != "P2":
        raise ValueError("not a plain PGM file")
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    pixels = np.array([int(t) for t in tokens[4 : 4 + width * height]], dtype=float)
    return pixels.reshape(height, width) / maxval
