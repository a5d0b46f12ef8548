"""Forward-field inversion and image resampling.

The forward grid maps source grid nodes into UV space. Each grid cell's
UV quad is split into two triangles and rasterized over the output
pixels; covered pixels receive barycentric-interpolated source
coordinates. Overlapping coverage (folds) is averaged, uncovered pixels
are holes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BackwardMap, DomainError, GridField, ImageBuffer

DEGENERATE_AREA = 1e-14


@dataclass
class InversionDiagnostics:
    degenerate_triangles: int = 0
    folded_pixels: int = 0
    hole_pixels: int = 0


def _source_lattice(n: int, width: float, height: float) -> np.ndarray:
    sx = np.linspace(0.0, width - 1.0, n)
    sy = np.linspace(0.0, height - 1.0, n)
    gx, gy = np.meshgrid(sx, sy)
    return np.stack([gx, gy], axis=-1)


def invert_forward(field: GridField, out_w: int, out_h: int,
                   src_size=None):
    """Rasterize the forward field into a dense backward map.

    src_size is the (width, height) frame the source lattice spans;
    defaults to (out_w, out_h). Returns (BackwardMap, InversionDiagnostics).
    """
    n = field.n
    if src_size is None:
        src_size = (out_w, out_h)
    src = _source_lattice(n, *src_size)
    # UV in output pixel units; pixel centers sit at integer coordinates
    uv = np.empty_like(field.values)
    uv[:, :, 0] = field.values[:, :, 0] * (out_w - 1)
    uv[:, :, 1] = field.values[:, :, 1] * (out_h - 1)

    acc = np.zeros((out_h, out_w, 2))
    cover = np.zeros((out_h, out_w), dtype=np.int32)
    diag = InversionDiagnostics()

    # two triangles per cell: (00, 10, 01) and (10, 11, 01)
    a00 = uv[:-1, :-1].reshape(-1, 2)
    a10 = uv[:-1, 1:].reshape(-1, 2)
    a01 = uv[1:, :-1].reshape(-1, 2)
    a11 = uv[1:, 1:].reshape(-1, 2)
    s00 = src[:-1, :-1].reshape(-1, 2)
    s10 = src[:-1, 1:].reshape(-1, 2)
    s01 = src[1:, :-1].reshape(-1, 2)
    s11 = src[1:, 1:].reshape(-1, 2)

    tris = [(a00, a10, a01, s00, s10, s01), (a10, a11, a01, s10, s11, s01)]
    for pa, pb, pc, va, vb, vc in tris:
        area = ((pb[:, 0] - pa[:, 0]) * (pc[:, 1] - pa[:, 1])
                - (pb[:, 1] - pa[:, 1]) * (pc[:, 0] - pa[:, 0]))
        for k in range(pa.shape[0]):
            ar = area[k]
            if abs(ar) < DEGENERATE_AREA:
                diag.degenerate_triangles += 1
                continue
            ax, ay = pa[k]
            bx, by = pb[k]
            cx, cy = pc[k]
            x0 = max(int(np.ceil(min(ax, bx, cx))), 0)
            x1 = min(int(np.floor(max(ax, bx, cx))), out_w - 1)
            y0 = max(int(np.ceil(min(ay, by, cy))), 0)
            y1 = min(int(np.floor(max(ay, by, cy))), out_h - 1)
            if x0 > x1 or y0 > y1:
                continue
            xs = np.arange(x0, x1 + 1)
            ys = np.arange(y0, y1 + 1)
            px, py = np.meshgrid(xs, ys)
            w0 = ((bx - px) * (cy - py) - (by - py) * (cx - px)) / ar
            w1 = ((cx - px) * (ay - py) - (cy - py) * (ax - px)) / ar
            w2 = 1.0 - w0 - w1
            eps = 1e-12
            inside = (w0 >= -eps) & (w1 >= -eps) & (w2 >= -eps)
            if not inside.any():
                continue
            val = (w0[..., None] * va[k] + w1[..., None] * vb[k]
                   + w2[..., None] * vc[k])
            iy, ix = np.nonzero(inside)
            acc[py[iy, ix], px[iy, ix]] += val[iy, ix]
            cover[py[iy, ix], px[iy, ix]] += 1

    valid = cover > 0
    values = np.zeros((out_h, out_w, 2))
    values[valid] = acc[valid] / cover[valid, None]
    diag.folded_pixels = int(np.sum(cover > 2))
    diag.hole_pixels = int(np.sum(~valid))
    return BackwardMap(out_w, out_h, values, valid), diag


def lattice_to_backward(field: GridField, out_w: int, out_h: int):
    """Treat a target->source lattice (TFI/TPS output) as a backward map.

    The lattice already stores source coordinates per target lattice
    point, so the dense map is plain bilinear upsampling.
    """
    small = BackwardMap(field.n, field.n, field.values)
    return upsample_backward(small, out_w, out_h)


def fill_holes(bm: BackwardMap) -> BackwardMap:
    """Assign every hole the value of its nearest covered pixel."""
    if bm.valid.all():
        return BackwardMap(bm.width, bm.height, bm.values.copy(),
                           bm.valid.copy())
    if not bm.valid.any():
        raise DomainError("cannot fill an all-hole backward map")
    from scipy import ndimage

    _, (iy, ix) = ndimage.distance_transform_edt(~bm.valid,
                                                 return_indices=True)
    values = bm.values[iy, ix]
    return BackwardMap(bm.width, bm.height, values,
                       np.ones_like(bm.valid))


def upsample_backward(bm: BackwardMap, W: int, H: int) -> BackwardMap:
    """Bilinear upsampling of source coordinates to W x H."""
    if not bm.valid.all():
        raise DomainError("fill holes before upsampling")
    ty = np.linspace(0.0, bm.height - 1.0, H)
    tx = np.linspace(0.0, bm.width - 1.0, W)
    j0 = np.minimum(np.floor(ty).astype(int), bm.height - 2)
    i0 = np.minimum(np.floor(tx).astype(int), bm.width - 2)
    fy = (ty - j0)[:, None, None]
    fx = (tx - i0)[None, :, None]
    v00 = bm.values[j0][:, i0]
    v10 = bm.values[j0][:, i0 + 1]
    v01 = bm.values[j0 + 1][:, i0]
    v11 = bm.values[j0 + 1][:, i0 + 1]
    values = ((1 - fy) * (1 - fx) * v00 + (1 - fy) * fx * v10
              + fy * (1 - fx) * v01 + fy * fx * v11)
    return BackwardMap(W, H, values)


def resample(src: ImageBuffer, bm: BackwardMap) -> ImageBuffer:
    """Bilinear sampling of src at each backward-map coordinate.

    Coordinates are clamped to the source bounds, so out-of-range map
    values (within the documented +-1 px slack) sample the border.
    """
    x = np.clip(bm.values[:, :, 0], 0.0, src.width - 1.0)
    y = np.clip(bm.values[:, :, 1], 0.0, src.height - 1.0)
    i0 = np.minimum(np.floor(x).astype(int), src.width - 2) if src.width > 1 \
        else np.zeros_like(x, dtype=int)
    j0 = np.minimum(np.floor(y).astype(int), src.height - 2) if src.height > 1 \
        else np.zeros_like(y, dtype=int)
    fx = x - i0
    fy = y - j0
    data = src.data.astype(np.float64)
    if src.channels == 1:
        data = data[:, :, None]
        fxc = fx[..., None]
        fyc = fy[..., None]
    else:
        fxc = fx[..., None]
        fyc = fy[..., None]
    i1 = np.minimum(i0 + 1, src.width - 1)
    j1 = np.minimum(j0 + 1, src.height - 1)
    out = ((1 - fxc) * (1 - fyc) * data[j0, i0]
           + fxc * (1 - fyc) * data[j0, i1]
           + (1 - fxc) * fyc * data[j1, i0]
           + fxc * fyc * data[j1, i1])
    out = np.clip(np.rint(out), 0, 255).astype(np.uint8)
    if src.channels == 1:
        out = out[:, :, 0]
    return ImageBuffer.from_array(out)
