"""2D workspaces, gridded signed distance fields and the hinge obstacle cost."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from .errors import InvalidArgumentError, OutOfBoundsError

FAR_DISTANCE = 1e6


@dataclass(frozen=True)
class Circle:
    center: Tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidArgumentError(f"circle radius must be positive, got {self.radius}")

    def signed_distance(self, pts):
        c = np.asarray(self.center, dtype=float)
        return np.linalg.norm(pts - c, axis=-1) - self.radius

    @property
    def feature_size(self):
        return self.radius


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by its min and max corners."""

    lo: Tuple[float, float]
    hi: Tuple[float, float]

    def __post_init__(self):
        if not (self.hi[0] > self.lo[0] and self.hi[1] > self.lo[1]):
            raise InvalidArgumentError(f"box corners not ordered: {self.lo}, {self.hi}")

    def signed_distance(self, pts):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        center = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        q = np.abs(pts - center) - half
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(np.max(q, axis=-1), 0.0)
        return outside + inside

    @property
    def center(self):
        return tuple(0.5 * (np.asarray(self.lo) + np.asarray(self.hi)))

    @property
    def feature_size(self):
        return 0.5 * min(self.hi[0] - self.lo[0], self.hi[1] - self.lo[1])


Obstacle = Union[Circle, Box]


@dataclass(frozen=True)
class Workspace:
    bounds: Tuple[Tuple[float, float], Tuple[float, float]]  # ((xmin, ymin), (xmax, ymax))
    obstacles: Tuple[Obstacle, ...] = field(default_factory=tuple)

    def __post_init__(self):
        (x0, y0), (x1, y1) = self.bounds
        if not (x1 > x0 and y1 > y0):
            raise InvalidArgumentError(f"degenerate workspace bounds {self.bounds}")
        object.__setattr__(self, "obstacles", tuple(self.obstacles))

    def signed_distance(self, pts) -> np.ndarray:
        """Exact distance to the nearest primitive (min over primitives)."""
        pts = np.asarray(pts, dtype=float)
        if not self.obstacles:
            return np.full(pts.shape[:-1], FAR_DISTANCE)
        return np.min([ob.signed_distance(pts) for ob in self.obstacles], axis=0)

    def contains(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        (x0, y0), (x1, y1) = self.bounds
        return (
            (pts[..., 0] >= x0) & (pts[..., 0] <= x1) & (pts[..., 1] >= y0) & (pts[..., 1] <= y1)
        )


class SignedDistanceField:
    """Signed distances sampled on a regular grid, queried bilinearly.

    ``values[r, c]`` is the distance at ``origin + (c * cell_size, r * cell_size)``.
    """

    def __init__(self, origin, cell_size, values):
        if not cell_size > 0:
            raise InvalidArgumentError(f"cell_size must be positive, got {cell_size}")
        values = np.array(values, dtype=float)
        if values.ndim != 2 or min(values.shape) < 2:
            raise InvalidArgumentError("values must be a 2D grid of at least 2x2 nodes")
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("values must be finite")
        values.setflags(write=False)
        self.origin = np.asarray(origin, dtype=float).reshape(2)
        self.cell_size = float(cell_size)
        self.values = values
        self._grid = values.tolist()

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def extent(self):
        """``(xmin, ymin, xmax, ymax)`` of the grid nodes."""
        x0, y0 = self.origin
        return (x0, y0, x0 + (self.cols - 1) * self.cell_size, y0 + (self.rows - 1) * self.cell_size)

    def _locate(self, pts):
        pts = np.asarray(pts, dtype=float)
        u = (pts[..., 0] - self.origin[0]) / self.cell_size
        v = (pts[..., 1] - self.origin[1]) / self.cell_size
        tol = 1e-9
        inside = (u >= -tol) & (u <= self.cols - 1 + tol) & (v >= -tol) & (v <= self.rows - 1 + tol)
        u = np.clip(u, 0.0, self.cols - 1)
        v = np.clip(v, 0.0, self.rows - 1)
        c = np.minimum(np.floor(u).astype(int), self.cols - 2)
        r = np.minimum(np.floor(v).astype(int), self.rows - 2)
        return u - c, v - r, r, c, inside

    def query_many(self, pts, strict=False):
        """Vectorized query; points outside the grid get ``FAR_DISTANCE`` and zero gradient
        unless ``strict``."""
        fu, fv, r, c, inside = self._locate(pts)
        if strict and not np.all(inside):
            raise OutOfBoundsError("query point outside the distance grid")
        g = self.values
        v00 = g[r, c]
        v01 = g[r, c + 1]
        v10 = g[r + 1, c]
        v11 = g[r + 1, c + 1]
        dist = (1 - fv) * ((1 - fu) * v00 + fu * v01) + fv * ((1 - fu) * v10 + fu * v11)
        gx = ((1 - fv) * (v01 - v00) + fv * (v11 - v10)) / self.cell_size
        gy = ((1 - fu) * (v10 - v00) + fu * (v11 - v01)) / self.cell_size
        grad = np.stack([gx, gy], axis=-1)
        dist = np.where(inside, dist, FAR_DISTANCE)
        grad = np.where(inside[..., None], grad, 0.0)
        return dist, grad

    def query_point(self, x: float, y: float):
        """Scalar ``(distance, gx, gy)``; ``None`` outside the grid."""
        h = self.cell_size
        u = (x - self.origin[0]) / h
        v = (y - self.origin[1]) / h
        cols, rows = self.cols, self.rows
        if not (-1e-9 <= u <= cols - 1 + 1e-9 and -1e-9 <= v <= rows - 1 + 1e-9):
            return None
        u = min(max(u, 0.0), cols - 1.0)
        v = min(max(v, 0.0), rows - 1.0)
        c = min(int(math.floor(u)), cols - 2)
        r = min(int(math.floor(v)), rows - 2)
        fu, fv = u - c, v - r
        row0, row1 = self._grid[r], self._grid[r + 1]
        v00, v01, v10, v11 = row0[c], row0[c + 1], row1[c], row1[c + 1]
        dist = (1 - fv) * ((1 - fu) * v00 + fu * v01) + fv * ((1 - fu) * v10 + fu * v11)
        gx = ((1 - fv) * (v01 - v00) + fv * (v11 - v10)) / h
        gy = ((1 - fu) * (v10 - v00) + fu * (v11 - v01)) / h
        return dist, gx, gy

    def query(self, p):
        """Bilinear distance and its gradient at ``p``; raises ``OutOfBoundsError`` outside."""
        x, y = (float(c) for c in np.asarray(p, dtype=float).reshape(2))
        hit = self.query_point(x, y)
        if hit is None:
            raise OutOfBoundsError(f"point ({x}, {y}) outside the distance grid {self.extent}")
        return hit[0], np.array(hit[1:])

    def query_or_far(self, p):
        """Like ``query`` but reports ``FAR_DISTANCE`` with zero gradient outside the grid."""
        x, y = (float(c) for c in np.asarray(p, dtype=float).reshape(2))
        hit = self.query_point(x, y)
        if hit is None:
            return FAR_DISTANCE, np.zeros(2)
        return hit[0], np.array(hit[1:])

    def save(self, path):
        path = Path(path)
        header = f"{float(self.origin[0])!r} {float(self.origin[1])!r} {self.cell_size!r} {self.rows} {self.cols}"
        with path.open("w") as fh:
            fh.write(header + "\n")
            for row in self.values:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def load(cls, path):
        path = Path(path)
        with path.open() as fh:
            head = fh.readline().split()
            if len(head) != 5:
                raise InvalidArgumentError(f"{path}: bad SDF header {' '.join(head)!r}")
            ox, oy, cell = (float(h) for h in head[:3])
            rows, cols = int(head[3]), int(head[4])
            values = np.loadtxt(fh, ndmin=2)
        if values.shape != (rows, cols):
            raise InvalidArgumentError(f"{path}: expected {rows}x{cols} values, got {values.shape}")
        return cls((ox, oy), cell, values)


def build_sdf(ws: Workspace, cell_size: float = 0.01) -> SignedDistanceField:
    """Grid the exact per-primitive signed distance over the workspace bounds."""
    if not cell_size > 0:
        raise InvalidArgumentError(f"cell_size must be positive, got {cell_size}")
    if ws.obstacles:
        smallest = min(ob.feature_size for ob in ws.obstacles)
        if cell_size > smallest:
            raise InvalidArgumentError(
                f"cell_size {cell_size} exceeds the smallest obstacle size {smallest}"
            )
    (x0, y0), (x1, y1) = ws.bounds
    cols = int(math.ceil((x1 - x0) / cell_size - 1e-9)) + 1
    rows = int(math.ceil((y1 - y0) / cell_size - 1e-9)) + 1
    xs = x0 + cell_size * np.arange(cols)
    ys = y0 + cell_size * np.arange(rows)
    grid = np.stack(np.meshgrid(xs, ys), axis=-1)
    return SignedDistanceField((x0, y0), cell_size, ws.signed_distance(grid))


def query_sdf(sdf: SignedDistanceField, p):
    return sdf.query(p)


def hinge_cost(d: float, eps: float):
    """``(max(eps - d, 0), slope)``; slope is -1 on the closed branch ``d <= eps``."""
    if eps < 0:
        raise InvalidArgumentError(f"eps must be non-negative, got {eps}")
    if d <= eps:
        return eps - d, -1.0
    return 0.0, 0.0
