"""Geometric element extraction.

Text-line polylines from a binary mask (classical substitute for a
learned segmenter) and vertical-line estimation by chaining text-line
endpoints through windowed nearest-neighbor search with a two-pass
mutual-agreement filter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DomainError, ImageBuffer, Point2, Polyline

MIN_COMPONENT_PIXELS = 32
COLUMN_STEP = 8


@dataclass(frozen=True)
class Endpoint:
    position: Point2
    side: str  # "left" or "right"
    direction: np.ndarray  # unit vector, estimated vertical direction

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=np.float64)
        if not np.isclose(np.linalg.norm(d), 1.0):
            raise DomainError("endpoint direction must be unit length")
        object.__setattr__(self, "direction", d)


@dataclass(frozen=True)
class VerticalDetectParams:
    w: float = 15.0  # half-width of the search window, pixels
    h: float = 15.0  # search height, pixels
    theta: float = float(np.arctan(0.45))  # max angle off the vertical dir

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise DomainError("window dimensions must be positive")
        if not 0 < self.theta < np.pi / 2:
            raise DomainError("theta must be in (0, pi/2)")


def _label_components(mask: np.ndarray):
    from scipy import ndimage

    labels, count = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    return labels, count


def extract_text_lines(mask: ImageBuffer):
    """Column-wise centroid polylines of wide connected components.

    Components narrower than 2x their height or smaller than
    MIN_COMPONENT_PIXELS foreground pixels are dropped. Control points are
    taken every COLUMN_STEP columns plus the last column, left to right.
    Output is sorted by leftmost x, then topmost centroid y.
    """
    if mask.channels != 1:
        raise DomainError("text-line mask must be single-channel")
    fg = mask.data > 0
    if not fg.any():
        return []
    labels, count = _label_components(fg)
    lines = []
    for lab in range(1, count + 1):
        ys, xs = np.nonzero(labels == lab)
        if xs.size < MIN_COMPONENT_PIXELS:
            continue
        x0, x1 = xs.min(), xs.max()
        y0, y1 = ys.min(), ys.max()
        width = x1 - x0 + 1
        height = y1 - y0 + 1
        if width < 2 * height:
            continue
        cols = list(range(x0, x1 + 1, COLUMN_STEP))
        if cols[-1] != x1:
            cols.append(x1)
        pts = []
        for c in cols:
            sel = ys[xs == c]
            if sel.size == 0:
                continue
            pts.append(Point2(float(c), float(sel.mean())))
        if len(pts) >= 2:
            lines.append(Polyline(pts))
    lines.sort(key=lambda ln: (ln.points[0].x, ln.points[0].y))
    return lines


def endpoint_direction(line: Polyline, side: str) -> np.ndarray:
    """Estimated vertical direction at one end of a text line.

    Average the tangents of the up-to-3 segments nearest the endpoint
    (oriented left->right) and rotate +90 degrees, so a horizontal line
    yields (0, 1): straight down in image coordinates.
    """
    xy = line.as_array()
    tangents = np.diff(xy, axis=0)
    if side == "left":
        chosen = tangents[:3]
    elif side == "right":
        chosen = tangents[-3:]
    else:
        raise DomainError(f"side must be 'left' or 'right', got {side!r}")
    mean = chosen.mean(axis=0)
    norm = np.linalg.norm(mean)
    if norm == 0:
        raise DomainError("degenerate endpoint tangent")
    tx, ty = mean / norm
    return np.array([-ty, tx])


def _collect_endpoints(text_lines, side):
    eps = []
    for idx, line in enumerate(text_lines):
        pt = line.points[0] if side == "left" else line.points[-1]
        eps.append(Endpoint(pt, side, endpoint_direction(line, side)))
    return eps


def _pass_edges(endpoints, params, upward):
    """One directed nearest-neighbor pass; returns undirected edge pairs.

    For each endpoint d, search the window [x-w, x+w] x [y-h, y] (upward
    pass) or [x-w, x+w] x [y, y+h] (downward pass) for the nearest other
    endpoint e, and keep the edge if the segment d->e deviates from d's
    vertical direction by less than theta.
    """
    edges = set()
    for i, d in enumerate(endpoints):
        dx0, dy0 = d.position.x, d.position.y
        best = None
        best_key = None
        for j, e in enumerate(endpoints):
            if i == j:
                continue
            ex, ey = e.position.x, e.position.y
            if abs(ex - dx0) > params.w:
                continue
            if upward:
                if not (dy0 - params.h <= ey <= dy0):
                    continue
            else:
                if not (dy0 <= ey <= dy0 + params.h):
                    continue
            dist = float(np.hypot(ex - dx0, ey - dy0))
            if dist == 0.0:
                continue
            key = (dist, ey, ex)
            if best_key is None or key < best_key:
                best_key = key
                best = (j, e)
        if best is None:
            continue
        j, e = best
        seg = np.array([e.position.x - dx0, e.position.y - dy0],
                       dtype=np.float64)
        seg /= np.linalg.norm(seg)
        # the vertical direction is a line orientation: compare against +-g
        cosang = abs(float(np.dot(seg, d.direction)))
        ang = float(np.arccos(np.clip(cosang, -1.0, 1.0)))
        if ang < params.theta:
            edges.add((min(i, j), max(i, j)))
    return edges


def _chain_edges(endpoints, edges):
    """Order mutual edges into top->bottom polyline chains."""
    adj = {}
    for a, b in sorted(edges):
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)
    seen = set()
    chains = []
    for start in sorted(adj):
        if start in seen:
            continue
        # walk to one extreme of the connected component
        comp = set()
        stack = [start]
        while stack:
            node = stack.pop()
            if node in comp:
                continue
            comp.add(node)
            stack.extend(adj[node] - comp)
        seen |= comp
        ordered = sorted(comp, key=lambda k: (endpoints[k].position.y,
                                              endpoints[k].position.x))
        if len(ordered) >= 2:
            chains.append(Polyline([endpoints[k].position for k in ordered]))
    return chains


def detect_vertical_lines(text_lines, params: VerticalDetectParams = None):
    """Estimate left/right margin polylines from text-line endpoints.

    Two windowed nearest-neighbor passes (searching upward, then
    downward) each propose endpoint connections; only edges proposed by
    both passes survive. Chains of at least two endpoints are returned
    ordered top to bottom, left-margin chains first.
    """
    if params is None:
        params = VerticalDetectParams()
    if len(text_lines) < 2:
        raise DomainError("need at least 2 text lines")
    result = []
    for side in ("left", "right"):
        endpoints = _collect_endpoints(text_lines, side)
        m1 = _pass_edges(endpoints, params, upward=True)
        m2 = _pass_edges(endpoints, params, upward=False)
        result.extend(_chain_edges(endpoints, m1 & m2))
    return result
