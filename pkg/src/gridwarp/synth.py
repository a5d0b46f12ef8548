"""Synthetic pages and ground-truth warps for closed-loop verification.

A warp is an analytic smooth bijection T of the unit square: it maps a
normalized warped-image coordinate to the normalized flat-page
coordinate. T restricted to the lattice is the ground-truth forward
field; its inverse (computed by fixed-point iteration, valid because the
displacement is contractive) gives the ground-truth backward map and the
warped element positions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (BackwardMap, DomainError, GeometricElements, GridField,
                   ImageBuffer, Point2, Polyline, resample_polyline)
from .remap import resample

WARP_KINDS = ("cylinder", "fold", "gaussian_bumps", "polynomial")
PAGE_MARGIN_FRAC = 0.10
BAR_GAP_MIN = 4  # px between adjacent text bars


class FoldedWarpError(ValueError):
    """Requested amplitude produces a non-invertible warp."""


@dataclass(frozen=True)
class WarpSpec:
    kind: str
    amplitude: float  # displacement bound as a fraction of the page side
    seed: int = 0
    count: int = 3  # bumps only

    def __post_init__(self):
        if self.kind not in WARP_KINDS:
            raise DomainError(f"unknown warp kind {self.kind!r}")
        if self.amplitude < 0:
            raise DomainError("amplitude must be non-negative")


@dataclass
class WarpBundle:
    """Everything needed to verify a dewarp run end to end.

    Ground truth lives in the document frame: the rectified target spans
    the document boundary, matching the optimizer's convention that the
    boundary maps to the edges of [0,1]^2. rectified_reference is the
    flat document resampled to that frame.
    """

    flat_image: ImageBuffer
    warped_image: ImageBuffer
    gt_forward: GridField  # warped frame lattice -> document-frame (u,v)
    gt_backward: BackwardMap  # document-frame pixel -> warped source pixel
    warped_elements: GeometricElements
    flat_elements: GeometricElements
    rectified_reference: ImageBuffer = None
    spec: WarpSpec = None


def render_page(width: int, height: int, line_count: int, seed: int):
    """White page with black text bars and an inset rectangular boundary.

    Returns (ImageBuffer, GeometricElements); the elements carry the
    exact bar midlines as text lines.
    """
    if line_count < 1:
        raise DomainError("line_count must be >= 1")
    rng = np.random.default_rng(seed)
    mx = int(round(width * PAGE_MARGIN_FRAC))
    my = int(round(height * PAGE_MARGIN_FRAC))
    x0, x1 = mx, width - 1 - mx
    y0, y1 = my, height - 1 - my
    img = np.full((height, width), 255, dtype=np.uint8)
    img[y0, x0:x1 + 1] = 0
    img[y1, x0:x1 + 1] = 0
    img[y0:y1 + 1, x0] = 0
    img[y0:y1 + 1, x1] = 0

    inner_top = y0 + BAR_GAP_MIN + 2
    inner_bottom = y1 - BAR_GAP_MIN - 2
    pitch = (inner_bottom - inner_top) / line_count
    if pitch < BAR_GAP_MIN + 2:
        raise DomainError("too many lines for the page height")
    thickness = int(min(12, pitch - BAR_GAP_MIN - 1))
    thickness = max(2, thickness)

    text_lines = []
    for k in range(line_count):
        yc = inner_top + (k + 0.5) * pitch
        # Mostly justified text: flush-left full-width bars with occasional
        # indented paragraph openers and short closing lines.
        # Indents are multiples of a coarse tab stop so paragraph openers
        # either share a stop (a true vertical) or sit far apart.
        if rng.random() < 0.15:
            indent = max(24, (x1 - x0) // 10) * int(rng.integers(1, 3))
        else:
            indent = 0
        full = x1 - x0 - indent - 8
        if rng.random() < 0.15:
            length = int(rng.integers(max(2, full // 2), max(3, full - 24)))
        else:
            length = full
        bx0 = x0 + 4 + indent
        bx1 = min(bx0 + length, x1 - 4)
        ty0 = int(round(yc - thickness / 2))
        img[ty0:ty0 + thickness, bx0:bx1 + 1] = 0
        mid = ty0 + (thickness - 1) / 2.0
        text_lines.append(Polyline([Point2(bx0, mid), Point2(bx1, mid)]))

    elems = GeometricElements(
        boundary_top=Polyline([Point2(x0, y0), Point2(x1, y0)]),
        boundary_bottom=Polyline([Point2(x0, y1), Point2(x1, y1)]),
        boundary_left=Polyline([Point2(x0, y0), Point2(x0, y1)]),
        boundary_right=Polyline([Point2(x1, y0), Point2(x1, y1)]),
        text_lines=tuple(text_lines),
        image_size=(width, height),
    )
    return ImageBuffer.from_array(img), elems


class Warp:
    """Analytic bijection of the unit square: warped coord -> flat coord."""

    def __init__(self, spec: WarpSpec, displacement):
        self.spec = spec
        self._disp = displacement

    def forward(self, xy: np.ndarray) -> np.ndarray:
        xy = np.asarray(xy, dtype=np.float64)
        return xy + self._disp(xy)

    def inverse(self, xy: np.ndarray, iters: int = 80) -> np.ndarray:
        """Solve forward(s) = xy by fixed-point iteration s = xy - d(s)."""
        xy = np.asarray(xy, dtype=np.float64)
        s = xy.copy()
        for _ in range(iters):
            s = xy - self._disp(s)
        return s


def _bump_displacement(rng, count, amplitude):
    centers = rng.uniform(0.25, 0.75, size=(count, 2))
    sigmas = rng.uniform(0.12, 0.22, size=count)
    dirs = rng.normal(size=(count, 2))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    amps = rng.uniform(0.5, 1.0, size=count)
    amps *= amplitude / amps.sum()

    def disp(xy):
        p = np.asarray(xy, dtype=np.float64)
        out = np.zeros_like(p)
        for c, s, d, a in zip(centers, sigmas, dirs, amps):
            r2 = np.sum((p - c) ** 2, axis=-1)
            out += (a * np.exp(-r2 / (2 * s * s)))[..., None] * d
        return out

    return disp


def make_warp(spec: WarpSpec, size=None, n: int = 128,
              check_resolution: int = 192):
    """Build the warp and its ground-truth forward lattice.

    Returns (Warp, GridField). Raises FoldedWarpError when a dense
    Jacobian scan finds an orientation flip.
    """
    rng = np.random.default_rng(spec.seed)
    a = spec.amplitude

    if spec.kind == "cylinder":
        phase = rng.uniform(0, 2 * np.pi)

        def disp(xy):
            p = np.asarray(xy, dtype=np.float64)
            out = np.zeros_like(p)
            out[..., 0] = a * np.sin(np.pi * p[..., 0] + phase) \
                * np.sin(np.pi * p[..., 0])
            return out
    elif spec.kind == "fold":
        cx = rng.uniform(0.35, 0.65)

        def disp(xy):
            p = np.asarray(xy, dtype=np.float64)
            out = np.zeros_like(p)
            crease = np.exp(-((p[..., 0] - cx) / 0.16) ** 2)
            out[..., 1] = a * crease * np.sin(np.pi * p[..., 1])
            return out
    elif spec.kind == "polynomial":
        c1 = rng.uniform(-1.0, 1.0)
        c2 = rng.uniform(-1.0, 1.0)

        def disp(xy):
            p = np.asarray(xy, dtype=np.float64)
            x, y = p[..., 0], p[..., 1]
            out = np.zeros_like(p)
            out[..., 0] = a * c1 * 16 * (x * (1 - x)) ** 2 * (2 * y - 1)
            out[..., 1] = a * c2 * 16 * (y * (1 - y)) ** 2 * (2 * x - 1)
            return out
    else:
        disp = _bump_displacement(rng, spec.count, a)

    warp = Warp(spec, disp)
    _check_fold_free(warp, check_resolution)

    t = np.linspace(0.0, 1.0, n)
    gx, gy = np.meshgrid(t, t)
    lattice = np.stack([gx, gy], axis=-1)
    gt_forward = GridField(n, warp.forward(lattice))
    return warp, gt_forward


def _check_fold_free(warp: Warp, res: int):
    t = np.linspace(0.0, 1.0, res)
    gx, gy = np.meshgrid(t, t)
    f = warp.forward(np.stack([gx, gy], axis=-1))
    e1 = np.diff(f, axis=1)
    e2 = np.diff(f, axis=0)
    det = (e1[:-1, :, 0] * e2[:, :-1, 1] - e1[:-1, :, 1] * e2[:, :-1, 0])
    if det.min() <= 0:
        raise FoldedWarpError(
            f"warp folds (min cell det {det.min():.3g}); lower the amplitude")


def apply_warp(page: ImageBuffer, elements: GeometricElements,
               warp: Warp, gt_forward: GridField,
               spec: WarpSpec = None) -> WarpBundle:
    """Warp a flat page and its elements into a verification bundle."""
    w, h = page.width, page.height
    scale = np.array([w - 1.0, h - 1.0])

    # warp the image: each warped pixel samples the flat page at T(pixel)
    t = np.stack(np.meshgrid(np.linspace(0, 1, w), np.linspace(0, 1, h)),
                 axis=-1)
    warp_bm = BackwardMap(w, h, warp.forward(t) * scale)
    warped_image = resample(page, warp_bm)

    # document box of the flat page, in normalized page coordinates
    bl = elements.boundary_left.as_array()
    br = elements.boundary_right.as_array()
    bt = elements.boundary_top.as_array()
    bb = elements.boundary_bottom.as_array()
    off = np.array([bl[:, 0].mean() / scale[0], bt[:, 1].mean() / scale[1]])
    span = np.array([br[:, 0].mean() / scale[0], bb[:, 1].mean() / scale[1]]) - off

    # express the forward lattice in the document frame
    gt_forward = GridField(gt_forward.n, (gt_forward.values - off) / span)

    # backward map: document-frame pixel -> flat page coord -> warped pixel
    flat_pos = off + t * span
    gt_backward = BackwardMap(w, h, warp.inverse(flat_pos) * scale)
    rectified_reference = resample(page, BackwardMap(w, h, flat_pos * scale))

    def map_line(line: Polyline, step: float = 4.0) -> Polyline:
        # densify first so straight flat lines pick up the warp's curvature
        dense = resample_polyline(line, step)
        pts = np.array([[p.x, p.y] for p in dense]) / scale
        mapped = np.clip(warp.inverse(pts) * scale, [0, 0], scale)
        return Polyline([Point2(float(x), float(y)) for x, y in mapped])

    warped_elements = GeometricElements(
        boundary_top=map_line(elements.boundary_top),
        boundary_bottom=map_line(elements.boundary_bottom),
        boundary_left=map_line(elements.boundary_left),
        boundary_right=map_line(elements.boundary_right),
        text_lines=tuple(map_line(l) for l in elements.text_lines),
        vertical_lines=tuple(map_line(l) for l in elements.vertical_lines),
        image_size=(w, h),
    )
    return WarpBundle(page, warped_image, gt_forward, gt_backward,
                      warped_elements, elements, rectified_reference, spec)


def make_bundle(spec: WarpSpec, size: int = 512, line_count: int = 12,
                n: int = 128) -> WarpBundle:
    """Convenience: render a page, build a warp, produce the bundle."""
    page, elems = render_page(size, size, line_count, spec.seed)
    warp, gt_forward = make_warp(spec, n=n)
    return apply_warp(page, elems, warp, gt_forward, spec)
