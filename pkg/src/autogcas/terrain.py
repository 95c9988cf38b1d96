"""Terrain elevation grids and the forward rectangular scan feeding the GCAS."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

import numpy as np


class TerrainFormatError(ValueError):
    pass


@dataclass(frozen=True)
class TerrainGrid:
    """Heights ``z[i, j]`` at ``(x[i], y[j])``; ``outside`` is returned off-grid."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    outside: float = 0.0

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        z = np.asarray(self.z, dtype=float)
        if x.ndim != 1 or y.ndim != 1 or x.size < 2 or y.size < 2:
            raise TerrainFormatError("axes must be vectors with at least two samples")
        if np.any(np.diff(x) <= 0) or np.any(np.diff(y) <= 0):
            raise TerrainFormatError("axes must be strictly increasing")
        if z.shape != (x.size, y.size):
            raise TerrainFormatError(f"height matrix shape {z.shape} does not match axes ({x.size}, {y.size})")
        if not np.all(np.isfinite(z)) or not math.isfinite(self.outside):
            raise TerrainFormatError("heights must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)

    @classmethod
    def flat(cls, height: float = 0.0, extent: float = 1.0e6) -> "TerrainGrid":
        ax = np.array([-extent, extent])
        return cls(ax, ax, np.full((2, 2), float(height)), outside=float(height))

    def dumps(self) -> str:
        lines = ["# autogcas terrain grid; heights row-major, one row per x sample, values along y",
                 f"outside {self.outside!r}",
                 "x " + " ".join(repr(float(v)) for v in self.x),
                 "y " + " ".join(repr(float(v)) for v in self.y),
                 "z"]
        lines += [" ".join(repr(float(v)) for v in row) for row in self.z]
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "TerrainGrid":
        fields = {}
        rows = []
        in_z = False
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                if in_z:
                    rows.append([float(v) for v in line.split()])
                    continue
                key, _, rest = line.partition(" ")
                if key == "z":
                    in_z = True
                elif key in ("x", "y"):
                    fields[key] = [float(v) for v in rest.split()]
                elif key == "outside":
                    fields[key] = float(rest)
                else:
                    raise TerrainFormatError(f"unknown key {key!r}")
            except ValueError as exc:
                if isinstance(exc, TerrainFormatError):
                    raise
                raise TerrainFormatError(str(exc)) from exc
        if "x" not in fields or "y" not in fields:
            raise TerrainFormatError("grid file needs x and y axes")
        if not rows or len({len(r) for r in rows}) != 1:
            raise TerrainFormatError("height rows missing or ragged")
        return cls(np.array(fields["x"]), np.array(fields["y"]), np.array(rows), fields.get("outside", 0.0))

    @classmethod
    def load(cls, path) -> "TerrainGrid":
        return cls.loads(Path(path).read_text())


@dataclass(frozen=True)
class ScanPattern:
    ahead: float = 750.0
    half_width: float = 150.0
    resolution: float = 25.0

    def __post_init__(self):
        if min(self.ahead, self.half_width, self.resolution) <= 0:
            raise ValueError("scan pattern dimensions must be positive")


def peaks(xh, yh):
    """The classic three-Gaussian 'peaks' surface on normalised coordinates."""
    xh = np.asarray(xh, dtype=float)
    yh = np.asarray(yh, dtype=float)
    return (3.0 * (1.0 - xh) ** 2 * np.exp(-xh**2 - (yh + 1.0) ** 2)
            - 10.0 * (xh / 5.0 - xh**3 - yh**5) * np.exp(-xh**2 - yh**2)
            - np.exp(-(xh + 1.0) ** 2 - yh**2) / 3.0)


def peaks_terrain(x_range: Tuple[float, float], y_range: Tuple[float, float], resolution: float,
                  horizontal_scale: float, vertical_scale: float) -> TerrainGrid:
    """Peaks surface centred on the middle of the ranges, floored at zero.

    ``horizontal_scale`` is the distance (m) mapped onto one unit of the
    normalised coordinate, so the interesting [-3, 3] region spans
    ``6 * horizontal_scale`` metres.
    """
    if horizontal_scale <= 0 or vertical_scale < 0 or resolution <= 0:
        raise ValueError("scales and resolution must be positive")
    x = np.arange(x_range[0], x_range[1] + 0.5 * resolution, resolution)
    y = np.arange(y_range[0], y_range[1] + 0.5 * resolution, resolution)
    xc = 0.5 * (x_range[0] + x_range[1])
    yc = 0.5 * (y_range[0] + y_range[1])
    X, Y = np.meshgrid((x - xc) / horizontal_scale, (y - yc) / horizontal_scale, indexing="ij")
    z = np.maximum(vertical_scale * peaks(X, Y), 0.0)
    return TerrainGrid(x, y, z + 0.0, outside=0.0)


def sample_height(grid: TerrainGrid, x: float, y: float) -> float:
    """Bilinear interpolation; ``grid.outside`` beyond the grid."""
    gx, gy = grid.x, grid.y
    if x < gx[0] or x > gx[-1] or y < gy[0] or y > gy[-1]:
        return grid.outside
    i = min(int(np.searchsorted(gx, x, side="right")) - 1, gx.size - 2)
    j = min(int(np.searchsorted(gy, y, side="right")) - 1, gy.size - 2)
    tx = (x - gx[i]) / (gx[i + 1] - gx[i])
    ty = (y - gy[j]) / (gy[j + 1] - gy[j])
    z = grid.z
    return float((1 - tx) * (1 - ty) * z[i, j] + tx * (1 - ty) * z[i + 1, j]
                 + (1 - tx) * ty * z[i, j + 1] + tx * ty * z[i + 1, j + 1])


def scan_points(position: Tuple[float, float], heading: float, pattern: ScanPattern) -> np.ndarray:
    """Sample points of the rectangle ahead of ``position`` along ``heading``."""
    n_a = int(math.floor(pattern.ahead / pattern.resolution + 1e-9))
    n_w = int(math.floor(pattern.half_width / pattern.resolution + 1e-9))
    # lattice anchored at the aircraft so a larger pattern always contains a smaller one
    along = np.arange(n_a + 1) * pattern.resolution
    across = np.arange(-n_w, n_w + 1) * pattern.resolution
    A, C = np.meshgrid(along, across, indexing="ij")
    ch, sh = math.cos(heading), math.sin(heading)
    # NED: x north, y east; lateral offset positive to the right of the heading
    px = position[0] + A * ch - C * sh
    py = position[1] + A * sh + C * ch
    return np.stack([px.ravel(), py.ravel()], axis=1)


def scan_max(grid: TerrainGrid, position: Tuple[float, float], heading: float,
             pattern: ScanPattern = ScanPattern()) -> float:
    """Highest terrain sample inside the forward scan rectangle (the GCAS h_DTED)."""
    pts = scan_points(position, heading, pattern)
    x, y = pts[:, 0], pts[:, 1]
    inside = (x >= grid.x[0]) & (x <= grid.x[-1]) & (y >= grid.y[0]) & (y <= grid.y[-1])
    best = grid.outside if not np.all(inside) else -np.inf
    if np.any(inside):
        xi, yi = x[inside], y[inside]
        i = np.minimum(np.searchsorted(grid.x, xi, side="right") - 1, grid.x.size - 2)
        j = np.minimum(np.searchsorted(grid.y, yi, side="right") - 1, grid.y.size - 2)
        tx = (xi - grid.x[i]) / (grid.x[i + 1] - grid.x[i])
        ty = (yi - grid.y[j]) / (grid.y[j + 1] - grid.y[j])
        z = grid.z
        h = ((1 - tx) * (1 - ty) * z[i, j] + tx * (1 - ty) * z[i + 1, j]
             + (1 - tx) * ty * z[i, j + 1] + tx * ty * z[i + 1, j + 1])
        best = max(best, float(h.max()))
    return float(best)
