"""Discretize geometric elements into per-channel sparse residual rows.

Every constraint point is coupled to the 4 enclosing grid nodes by
bilinear weights. Boundary points pin absolute u or v targets; line
points within one chain are tied pairwise to share a value.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .core import (DomainError, GeometricElements, Point2, Polyline,
                   bilinear_weights, resample_polyline)

WORKING_SIZE = 512  # constraints are discretized in a 512x512 frame

CH_U = 0
CH_V = 1

TEXT_INTERVAL = 16.0
VERTICAL_INTERVAL = 10.0
BOUNDARY_INTERVAL = 4.0


class ConfigurationError(ValueError):
    """Element set cannot be turned into a well-posed problem."""


@dataclass(frozen=True)
class ConstraintPoint:
    position: Point2  # working-frame pixels
    kind: str  # boundary | text_line | vertical_line
    channel: int  # CH_U or CH_V
    target: float = None  # boundary only
    chain_id: int = None  # lines only
    order: int = None  # index within chain

    def __post_init__(self):
        if self.kind == "boundary":
            if self.target is None:
                raise DomainError("boundary point needs a target")
        elif self.chain_id is None or self.order is None:
            raise DomainError("line point needs chain_id and order")


@dataclass
class ConstraintSet:
    points: list
    n: int
    image_size: tuple = (WORKING_SIZE, WORKING_SIZE)

    def boundary_points(self, channel):
        return [p for p in self.points
                if p.kind == "boundary" and p.channel == channel]

    def chains(self, channel):
        """Line chains for one channel as ordered point lists."""
        by_id = {}
        for p in self.points:
            if p.kind != "boundary" and p.channel == channel:
                by_id.setdefault(p.chain_id, []).append(p)
        out = []
        for cid in sorted(by_id):
            chain = sorted(by_id[cid], key=lambda p: p.order)
            out.append(chain)
        return out


@dataclass
class ResidualBlock:
    """Stacked sparse rows A over one channel's n^2 unknowns plus rhs b.

    The block contributes weight * ||A phi - b||^2 to the energy.
    """

    rows: sparse.csr_matrix
    rhs: np.ndarray
    weight: float = 1.0
    name: str = ""

    def energy(self, phi_flat: np.ndarray) -> float:
        r = self.rows @ phi_flat - self.rhs
        return float(self.weight * np.dot(r, r))


def _to_grid_units(p: Point2, image_size, n) -> Point2:
    w, h = image_size
    gx = np.clip(p.x / (w - 1) * (n - 1), 0.0, n - 1.0)
    gy = np.clip(p.y / (h - 1) * (n - 1), 0.0, n - 1.0)
    return Point2(float(gx), float(gy))


def _rescale_polyline(line: Polyline, src_size, dst_size) -> Polyline:
    sw, sh = src_size
    dw, dh = dst_size
    sx = (dw - 1) / (sw - 1)
    sy = (dh - 1) / (sh - 1)
    return Polyline([Point2(p.x * sx, p.y * sy) for p in line.points])


def discretize_elements(elems: GeometricElements,
                        text_interval: float = TEXT_INTERVAL,
                        vertical_interval: float = VERTICAL_INTERVAL,
                        boundary_interval: float = BOUNDARY_INTERVAL,
                        n: int = 128) -> ConstraintSet:
    """Resample all elements to constraint points in the working frame.

    Boundary targets follow the UV pattern: left u=0, right u=1, top v=0,
    bottom v=1. Text lines become V-channel chains, vertical lines
    U-channel chains. Corners appear in both incident sides.
    """
    frame = (WORKING_SIZE, WORKING_SIZE)
    points = []

    sides = [
        (elems.boundary_left, CH_U, 0.0),
        (elems.boundary_right, CH_U, 1.0),
        (elems.boundary_top, CH_V, 0.0),
        (elems.boundary_bottom, CH_V, 1.0),
    ]
    for line, channel, target in sides:
        if line is None:
            raise ConfigurationError("missing boundary polyline")
        scaled = _rescale_polyline(line, elems.image_size, frame)
        for p in resample_polyline(scaled, boundary_interval):
            points.append(ConstraintPoint(p, "boundary", channel, target=target))

    chain_id = 0
    for line in elems.text_lines:
        scaled = _rescale_polyline(line, elems.image_size, frame)
        samples = resample_polyline(scaled, text_interval)
        for k, p in enumerate(samples):
            points.append(ConstraintPoint(p, "text_line", CH_V,
                                          chain_id=chain_id, order=k))
        chain_id += 1
    for line in elems.vertical_lines:
        scaled = _rescale_polyline(line, elems.image_size, frame)
        samples = resample_polyline(scaled, vertical_interval)
        for k, p in enumerate(samples):
            points.append(ConstraintPoint(p, "vertical_line", CH_U,
                                          chain_id=chain_id, order=k))
        chain_id += 1

    return ConstraintSet(points, n, frame)


def _point_row(p: ConstraintPoint, cset: ConstraintSet):
    """(flat node indices, bilinear weights) for one constraint point."""
    g = _to_grid_units(p.position, cset.image_size, cset.n)
    indices, weights = bilinear_weights(g, cset.n)
    flat = [j * cset.n + i for (i, j) in indices]
    return flat, weights


def assemble_boundary_block(cset: ConstraintSet, channel) -> ResidualBlock:
    """One row per boundary point: bilinear coupling minus the target."""
    pts = cset.boundary_points(channel)
    n2 = cset.n * cset.n
    data, ri, ci, rhs = [], [], [], []
    for r, p in enumerate(pts):
        flat, weights = _point_row(p, cset)
        for f, w in zip(flat, weights):
            ri.append(r)
            ci.append(f)
            data.append(w)
        rhs.append(p.target)
    rows = sparse.csr_matrix((data, (ri, ci)), shape=(len(pts), n2))
    rows.sum_duplicates()
    return ResidualBlock(rows, np.array(rhs, dtype=np.float64), 1.0,
                         name=f"boundary[{'UV'[channel]}]")


def assemble_line_block(cset: ConstraintSet, channel,
                        weight: float = 1.0) -> ResidualBlock:
    """One row per adjacent point pair within each chain, rhs 0."""
    chains = cset.chains(channel)
    n2 = cset.n * cset.n
    data, ri, ci = [], [], []
    r = 0
    for chain in chains:
        if len(chain) < 2:
            raise DomainError("constraint chain with fewer than 2 points")
        for a, b in zip(chain, chain[1:]):
            fa, wa = _point_row(a, cset)
            fb, wb = _point_row(b, cset)
            for f, w in zip(fa, wa):
                ri.append(r)
                ci.append(f)
                data.append(w)
            for f, w in zip(fb, wb):
                ri.append(r)
                ci.append(f)
                data.append(-w)
            r += 1
    rows = sparse.csr_matrix((data, (ri, ci)), shape=(r, n2))
    rows.sum_duplicates()
    return ResidualBlock(rows, np.zeros(r), weight,
                         name=f"lines[{'UV'[channel]}]")
