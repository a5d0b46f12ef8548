"""End-to-end dewarping runs shared by the CLI and the test suite."""

from __future__ import annotations

import numpy as np

from . import remap
from .baselines import ArcCurve, BoundaryCurves, tfi_grid, tps_fit, tps_grid
from .constraints import discretize_elements
from .core import GeometricElements, GridField, ImageBuffer
from .elements import VerticalDetectParams, detect_vertical_lines
from .io import DEFAULT_CONFIG
from .solver import SolverParams, solve_field

BM_RESOLUTION = 128  # backward map is rasterized here, then upsampled


def solver_params_from_config(cfg: dict) -> SolverParams:
    return SolverParams(n=int(cfg["n"]), alpha=float(cfg["alpha"]),
                        lam=float(cfg["lambda"]), beta=float(cfg["beta"]),
                        tol=float(cfg["tol"]),
                        max_iters=int(cfg["max_iters"]))


def detect_params_from_config(cfg: dict) -> VerticalDetectParams:
    return VerticalDetectParams(w=float(cfg["detect_w"]),
                                h=float(cfg["detect_h"]),
                                theta=float(cfg["detect_theta"]))


def with_detected_verticals(elems: GeometricElements,
                            params: VerticalDetectParams = None):
    """Replace vertical lines with chains detected from text-line endpoints."""
    if len(elems.text_lines) < 2:
        return elems
    verticals = detect_vertical_lines(list(elems.text_lines), params)
    return GeometricElements(
        boundary_top=elems.boundary_top,
        boundary_bottom=elems.boundary_bottom,
        boundary_left=elems.boundary_left,
        boundary_right=elems.boundary_right,
        text_lines=elems.text_lines,
        vertical_lines=tuple(verticals),
        image_size=elems.image_size,
    )


def solve_forward_field(elems: GeometricElements, cfg: dict = None):
    """Discretize elements and solve for the forward deformation field."""
    cfg = cfg or dict(DEFAULT_CONFIG)
    params = solver_params_from_config(cfg)
    cset = discretize_elements(
        elems,
        text_interval=float(cfg["text_interval"]),
        vertical_interval=float(cfg["vertical_interval"]),
        boundary_interval=float(cfg["boundary_interval"]),
        n=params.n)
    field, diagnostics = solve_field(cset, params)
    return field, diagnostics


def backward_map_for(field: GridField, src_size, out_w: int, out_h: int):
    """Forward field -> hole-filled, upsampled dense backward map."""
    bm, diag = remap.invert_forward(field, BM_RESOLUTION, BM_RESOLUTION,
                                    src_size=src_size)
    bm = remap.fill_holes(bm)
    bm = remap.upsample_backward(bm, out_w, out_h)
    return bm, diag


def dewarp(image: ImageBuffer, elems: GeometricElements, cfg: dict = None,
           detect_verticals: bool = False, out_size=None):
    """Full optimizer pipeline. Returns (rectified, field, diagnostics)."""
    cfg = cfg or dict(DEFAULT_CONFIG)
    if detect_verticals:
        elems = with_detected_verticals(elems, detect_params_from_config(cfg))
    field, diag = solve_forward_field(elems, cfg)
    if out_size is None:
        side = max(image.width, image.height)
        out_size = (side, side)
    bm, inv_diag = backward_map_for(field, elems.image_size, *out_size)
    rectified = remap.resample(image, bm)
    diagnostics = {
        "solver": diag,
        "inversion": {
            "degenerate_triangles": inv_diag.degenerate_triangles,
            "folded_pixels": inv_diag.folded_pixels,
            "hole_pixels": inv_diag.hole_pixels,
        },
    }
    return rectified, field, diagnostics


def boundary_curves(elems: GeometricElements) -> BoundaryCurves:
    return BoundaryCurves.from_polylines(
        elems.boundary_top, elems.boundary_right,
        elems.boundary_bottom, elems.boundary_left)


def tps_boundary_model(elems: GeometricElements, per_side: int = 24,
                       reg: float = 0.0):
    """TPS mapping the target unit square boundary to the source boundary."""
    curves = boundary_curves(elems)
    t_full = np.linspace(0.0, 1.0, per_side)
    t_inner = t_full[1:-1]
    p, q = [], []
    # top and bottom carry the corners, left and right only interiors
    for t in t_full:
        p.append([t, 0.0])
        q.append(curves.c1(t))
        p.append([t, 1.0])
        q.append(curves.c3(t))
    for t in t_inner:
        p.append([0.0, t])
        q.append(curves.c4(t))
        p.append([1.0, t])
        q.append(curves.c2(t))
    return tps_fit(np.array(p), np.array(q), reg=reg)


def baseline_dewarp(image: ImageBuffer, elems: GeometricElements,
                    method: str, n: int = 128, out_size=None):
    """TFI or TPS boundary-driven dewarp. Returns (rectified, lattice)."""
    if out_size is None:
        side = max(image.width, image.height)
        out_size = (side, side)
    if method == "tfi":
        lattice = tfi_grid(boundary_curves(elems), n)
    elif method == "tps":
        lattice = tps_grid(tps_boundary_model(elems), n)
    else:
        raise ValueError(f"unknown baseline {method!r}")
    bm = remap.lattice_to_backward(lattice, *out_size)
    return remap.resample(image, bm), lattice
