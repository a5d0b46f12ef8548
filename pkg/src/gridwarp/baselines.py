"""Boundary-driven comparison dewarpers: transfinite interpolation
(Coons patch blend of the four boundary curves) and thin plate splines.

Both produce target->source lattices: the value at lattice point (u, v)
is the source position the rectified pixel should sample from. The remap
module turns such lattices into dense backward maps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DomainError, GridField, Polyline

CORNER_TOL = 1e-3


class ArcCurve:
    """Polyline reparameterized by normalized arc length t in [0, 1]."""

    def __init__(self, line: Polyline):
        xy = line.as_array()
        seg = np.hypot(*np.diff(xy, axis=0).T)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        if cum[-1] == 0:
            raise DomainError("degenerate boundary curve")
        self._t = cum / cum[-1]
        self._xy = xy

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        x = np.interp(t, self._t, self._xy[:, 0])
        y = np.interp(t, self._t, self._xy[:, 1])
        return np.stack([x, y], axis=-1)


@dataclass
class BoundaryCurves:
    """Four arc-length curves: c1 top, c2 right, c3 bottom, c4 left.

    c1 and c3 run left->right over t, c2 and c4 top->bottom.
    """

    c1: ArcCurve
    c2: ArcCurve
    c3: ArcCurve
    c4: ArcCurve

    @classmethod
    def from_polylines(cls, top, right, bottom, left) -> "BoundaryCurves":
        return cls(ArcCurve(top), ArcCurve(right), ArcCurve(bottom),
                   ArcCurve(left))

    def corners(self):
        """(p00, p10, p01, p11): top-left, top-right, bottom-left, bottom-right."""
        return (self.c1(0.0), self.c1(1.0), self.c3(0.0), self.c3(1.0))

    def check_corners(self, tol=CORNER_TOL):
        gaps = [
            np.linalg.norm(self.c1(0.0) - self.c4(0.0)),
            np.linalg.norm(self.c1(1.0) - self.c2(0.0)),
            np.linalg.norm(self.c3(0.0) - self.c4(1.0)),
            np.linalg.norm(self.c3(1.0) - self.c2(1.0)),
        ]
        worst = max(float(g) for g in gaps)
        if worst > tol:
            raise DomainError(f"boundary corners mismatch by {worst:.3g}")


def tfi_grid(curves: BoundaryCurves, n: int) -> GridField:
    """Coons-patch blend of the boundary curves on an n x n lattice.

    Entry [j, i] is the source position for the target lattice point
    (u, v) = (i, j) / (n - 1): the sum of the two ruled surfaces spanned
    by opposite boundary pairs minus the bilinear corner sheet.
    """
    curves.check_corners()
    t = np.linspace(0.0, 1.0, n)
    u = t[None, :, None]  # broadcast over columns
    v = t[:, None, None]  # broadcast over rows
    top = curves.c1(t)[None, :, :]
    bottom = curves.c3(t)[None, :, :]
    left = curves.c4(t)[:, None, :]
    right = curves.c2(t)[:, None, :]
    p00, p10, p01, p11 = curves.corners()

    ruled_lr = (1 - u) * left + u * right
    ruled_tb = (1 - v) * top + v * bottom
    corner = ((1 - u) * (1 - v) * p00 + u * (1 - v) * p10
              + (1 - u) * v * p01 + u * v * p11)
    return GridField(n, ruled_lr + ruled_tb - corner)


def _tps_kernel(r2: np.ndarray) -> np.ndarray:
    # U(r) = r^2 log r, with U(0) = 0
    out = np.zeros_like(r2)
    pos = r2 > 0
    out[pos] = 0.5 * r2[pos] * np.log(r2[pos])
    return out


@dataclass
class TpsModel:
    control: np.ndarray  # (N, 2) source-side control points
    coeffs: np.ndarray  # (N, 2) kernel coefficients
    affine: np.ndarray  # (3, 2) rows: constant, x, y
    reg: float

    def __call__(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        d = pts[:, None, :] - self.control[None, :, :]
        k = _tps_kernel(np.sum(d * d, axis=-1))
        ones = np.ones((pts.shape[0], 1))
        out = np.hstack([ones, pts]) @ self.affine + k @ self.coeffs
        return out

    @property
    def bending_energy(self) -> float:
        """Quadratic form w^T K w of the kernel coefficients (per axis)."""
        d = self.control[:, None, :] - self.control[None, :, :]
        k = _tps_kernel(np.sum(d * d, axis=-1))
        return float(np.sum(self.coeffs * (k @ self.coeffs)))


def tps_fit(p, q, reg: float = 0.0) -> TpsModel:
    """Fit the bordered biharmonic-kernel system mapping p -> q.

    With reg = 0 the spline interpolates exactly; reg > 0 trades
    control-point displacement against bending energy.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] < 3 or p.shape != q.shape:
        raise DomainError("need >= 3 control point pairs of equal shape")
    if reg < 0:
        raise DomainError("regularization must be non-negative")
    npts = p.shape[0]
    d = p[:, None, :] - p[None, :, :]
    K = _tps_kernel(np.sum(d * d, axis=-1)) + reg * np.eye(npts)
    P = np.hstack([np.ones((npts, 1)), p])
    L = np.zeros((npts + 3, npts + 3))
    L[:npts, :npts] = K
    L[:npts, npts:] = P
    L[npts:, :npts] = P.T
    rhs = np.vstack([q, np.zeros((3, 2))])
    try:
        sol = np.linalg.solve(L, rhs)
    except np.linalg.LinAlgError as exc:
        raise DomainError(f"singular TPS system: {exc}") from exc
    if not np.all(np.isfinite(sol)):
        raise DomainError("singular TPS system (non-finite solution)")
    return TpsModel(control=p, coeffs=sol[:npts], affine=sol[npts:], reg=reg)


def tps_grid(model: TpsModel, n: int) -> GridField:
    """Evaluate the model on the n x n unit lattice."""
    t = np.linspace(0.0, 1.0, n)
    uu, vv = np.meshgrid(t, t)
    pts = np.stack([uu.ravel(), vv.ravel()], axis=-1)
    vals = model(pts).reshape(n, n, 2)
    return GridField(n, vals)
