"""Geometry and field primitives shared by the whole pipeline.

Coordinate conventions:
  * source pixels: x rightward, y downward
  * grid units: g = (x / (W-1)) * (n-1), same for y
  * normalized target coordinates: u in [0,1] left->right, v in [0,1]
    top->bottom
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DomainError(ValueError):
    """Input outside the documented domain of an operation."""


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.y)):
            raise DomainError(f"non-finite point ({self.x}, {self.y})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=np.float64)


@dataclass(frozen=True)
class Polyline:
    """Ordered chain of >=2 control points.

    Text lines run left->right, vertical lines top->bottom.
    """

    points: tuple

    def __init__(self, points):
        pts = tuple(p if isinstance(p, Point2) else Point2(*p) for p in points)
        if len(pts) < 2:
            raise DomainError("polyline needs at least 2 control points")
        for a, b in zip(pts, pts[1:]):
            if a.x == b.x and a.y == b.y:
                raise DomainError("consecutive polyline points must be distinct")
        object.__setattr__(self, "points", pts)

    def as_array(self) -> np.ndarray:
        return np.array([[p.x, p.y] for p in self.points], dtype=np.float64)

    def arc_length(self) -> float:
        xy = self.as_array()
        return float(np.sum(np.hypot(*np.diff(xy, axis=0).T)))


@dataclass(frozen=True)
class GeometricElements:
    boundary_top: Polyline
    boundary_bottom: Polyline
    boundary_left: Polyline
    boundary_right: Polyline
    text_lines: tuple = ()
    vertical_lines: tuple = ()
    image_size: tuple = (512, 512)

    def __post_init__(self):
        object.__setattr__(self, "text_lines", tuple(self.text_lines))
        object.__setattr__(self, "vertical_lines", tuple(self.vertical_lines))
        w, h = self.image_size
        for line in self.all_polylines():
            for p in line.points:
                if not (0 <= p.x <= w and 0 <= p.y <= h):
                    raise DomainError(
                        f"point ({p.x}, {p.y}) outside image {w}x{h}")

    def all_polylines(self):
        yield self.boundary_top
        yield self.boundary_bottom
        yield self.boundary_left
        yield self.boundary_right
        yield from self.text_lines
        yield from self.vertical_lines


@dataclass
class GridField:
    """n x n forward map: grid node -> (u, v) normalized target coords.

    values has shape (n, n, 2) indexed [row=j, col=i], channel 0 = u,
    channel 1 = v.
    """

    n: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.n, self.n, 2):
            raise DomainError(
                f"grid values shape {self.values.shape} != ({self.n},{self.n},2)")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("grid field has non-finite entries")

    @classmethod
    def uniform(cls, n: int) -> "GridField":
        t = np.linspace(0.0, 1.0, n)
        u, v = np.meshgrid(t, t)  # u varies along columns, v along rows
        return cls(n, np.stack([u, v], axis=-1))

    @property
    def u(self) -> np.ndarray:
        return self.values[:, :, 0]

    @property
    def v(self) -> np.ndarray:
        return self.values[:, :, 1]


HOLE = np.nan  # kept for readability; holes are tracked by the valid mask


@dataclass
class BackwardMap:
    """Per-target-pixel source coordinate with an explicit validity mask."""

    width: int
    height: int
    values: np.ndarray  # (H, W, 2) source (x, y)
    valid: np.ndarray = None  # (H, W) bool, False = hole

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.height, self.width, 2):
            raise DomainError("backward map shape mismatch")
        if self.valid is None:
            self.valid = np.ones((self.height, self.width), dtype=bool)
        else:
            self.valid = np.asarray(self.valid, dtype=bool)
        if self.valid.shape != (self.height, self.width):
            raise DomainError("backward map mask shape mismatch")

    @property
    def hole_count(self) -> int:
        return int(np.sum(~self.valid))


@dataclass
class ImageBuffer:
    """Row-major 8-bit image, 1 (gray) or 3 (RGB) channels."""

    width: int
    height: int
    channels: int
    data: np.ndarray

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.uint8)
        expect = (self.height, self.width) if self.channels == 1 else (
            self.height, self.width, self.channels)
        if self.channels not in (1, 3):
            raise DomainError("channels must be 1 or 3")
        if self.data.shape != expect:
            raise DomainError(
                f"image data shape {self.data.shape} != {expect}")

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "ImageBuffer":
        arr = np.asarray(arr)
        if arr.ndim == 2:
            return cls(arr.shape[1], arr.shape[0], 1, arr)
        return cls(arr.shape[1], arr.shape[0], arr.shape[2], arr)

    def gray(self) -> np.ndarray:
        """Rec. 601 luma as float64 in [0, 255]."""
        a = self.data.astype(np.float64)
        if self.channels == 1:
            return a
        return 0.299 * a[:, :, 0] + 0.587 * a[:, :, 1] + 0.114 * a[:, :, 2]


def bilinear_weights(p: Point2, n: int):
    """Coupling of a point in grid units to the 4 enclosing grid nodes.

    Returns (indices, weights): four (col, row) node index pairs and
    non-negative weights summing to 1. A point exactly on a node gets
    weight 1 there.
    """
    x, y = float(p.x), float(p.y)
    if not (0.0 <= x <= n - 1 and 0.0 <= y <= n - 1):
        raise DomainError(f"point ({x}, {y}) outside grid [0, {n - 1}]^2")
    i0 = min(int(np.floor(x)), n - 2)
    j0 = min(int(np.floor(y)), n - 2)
    dx = x - i0
    dy = y - j0
    indices = ((i0, j0), (i0 + 1, j0), (i0, j0 + 1), (i0 + 1, j0 + 1))
    weights = (
        (1.0 - dx) * (1.0 - dy),
        dx * (1.0 - dy),
        (1.0 - dx) * dy,
        dx * dy,
    )
    return indices, weights


def resample_polyline(line: Polyline, interval: float):
    """Points at arc-length spacing `interval`, both endpoints kept.

    The spacing is uniform per polyline: the arc length is divided into
    ceil(L / interval) equal steps, so consecutive samples are never more
    than `interval` apart.
    """
    if interval <= 0:
        raise DomainError("interval must be positive")
    xy = line.as_array()
    seg = np.hypot(*np.diff(xy, axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    if total == 0.0:
        return []
    steps = max(1, int(np.ceil(total / interval - 1e-12)))
    targets = np.linspace(0.0, total, steps + 1)
    out_x = np.interp(targets, cum, xy[:, 0])
    out_y = np.interp(targets, cum, xy[:, 1])
    return [Point2(float(x), float(y)) for x, y in zip(out_x, out_y)]
