"""Image- and grid-level evaluation: MS-SSIM, local distortion against a
reference flow, and deformation-grid diagnostics."""

from __future__ import annotations

import numpy as np
from scipy import signal

from .core import DomainError, GridField, ImageBuffer

MSSSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
WINDOW_SIZE = 11
WINDOW_SIGMA = 1.5
K1 = 0.01
K2 = 0.03
DYNAMIC_RANGE = 255.0
MIN_SIDE = 176  # 11-px window must survive 4 dyadic downsamplings


def gaussian_window(size: int = WINDOW_SIZE,
                    sigma: float = WINDOW_SIGMA) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size) - half
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    g /= g.sum()
    return g


def _filter(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    # separable valid-mode Gaussian
    tmp = signal.convolve2d(img, g[None, :], mode="valid")
    return signal.convolve2d(tmp, g[:, None], mode="valid")


def _ssim_components(a: np.ndarray, b: np.ndarray):
    """Mean luminance term and mean contrast-structure term."""
    g = gaussian_window()
    c1 = (K1 * DYNAMIC_RANGE) ** 2
    c2 = (K2 * DYNAMIC_RANGE) ** 2
    mu_a = _filter(a, g)
    mu_b = _filter(b, g)
    mu_aa = mu_a * mu_a
    mu_bb = mu_b * mu_b
    mu_ab = mu_a * mu_b
    var_a = _filter(a * a, g) - mu_aa
    var_b = _filter(b * b, g) - mu_bb
    cov = _filter(a * b, g) - mu_ab
    lum = (2 * mu_ab + c1) / (mu_aa + mu_bb + c1)
    cs = (2 * cov + c2) / (var_a + var_b + c2)
    return float(lum.mean()), float(cs.mean()), float((lum * cs).mean())


def _downsample2(img: np.ndarray) -> np.ndarray:
    h, w = img.shape
    img = img[: h - h % 2, : w - w % 2]
    return (img[0::2, 0::2] + img[1::2, 0::2]
            + img[0::2, 1::2] + img[1::2, 1::2]) / 4.0


def _as_gray(img) -> np.ndarray:
    if isinstance(img, ImageBuffer):
        return img.gray()
    return np.asarray(img, dtype=np.float64)


def ms_ssim(a, b) -> float:
    """5-scale MS-SSIM on grayscale, Gaussian window 11 / sigma 1.5.

    Contrast-structure means are clamped at 0 before exponentiation so
    anti-correlated structure drives the score toward 0.
    """
    a = _as_gray(a)
    b = _as_gray(b)
    if a.shape != b.shape:
        raise DomainError("images must have equal dimensions")
    scales = len(MSSSIM_WEIGHTS)
    min_side = WINDOW_SIZE * 2 ** (scales - 1)
    if min(a.shape) < min_side:
        raise DomainError(
            f"image side {min(a.shape)} < {min_side}; use fewer scales")
    score = 1.0
    for level, weight in enumerate(MSSSIM_WEIGHTS):
        lum, cs, ssim_full = _ssim_components(a, b)
        if level < scales - 1:
            score *= max(cs, 0.0) ** weight
            a = _downsample2(a)
            b = _downsample2(b)
        else:
            score *= max(ssim_full, 0.0) ** weight
    return float(score)


def local_distortion(flow_est: np.ndarray, flow_ref: np.ndarray,
                     valid=None) -> float:
    """Mean Euclidean distance between two dense 2-fields, in pixels."""
    flow_est = np.asarray(flow_est, dtype=np.float64)
    flow_ref = np.asarray(flow_ref, dtype=np.float64)
    if flow_est.shape != flow_ref.shape or flow_est.shape[-1] != 2:
        raise DomainError("flows must be equal-shaped (H, W, 2) fields")
    diff = np.linalg.norm(flow_est - flow_ref, axis=-1)
    if valid is not None:
        valid = np.asarray(valid, dtype=bool)
        if not valid.any():
            raise DomainError("no valid pixels")
        diff = diff[valid]
    if diff.size == 0:
        raise DomainError("no valid pixels")
    return float(diff.mean())


def grid_diagnostics(field: GridField) -> dict:
    """Fold count, minimum cell area, and uniformity deviations.

    A cell folds when the determinant of its forward-difference Jacobian
    is negative. row_v_std / col_u_std measure how far v varies within
    rows and u within columns (zero for the uniform pattern).
    """
    vals = field.values
    e1 = vals[:, 1:, :] - vals[:, :-1, :]  # along columns (u direction)
    e2 = vals[1:, :, :] - vals[:-1, :, :]  # along rows (v direction)
    det = (e1[:-1, :, 0] * e2[:, :-1, 1] - e1[:-1, :, 1] * e2[:, :-1, 0])
    return {
        "fold_count": int(np.sum(det < 0)),
        "min_cell_area": float(det.min()),
        "row_v_std": float(np.mean(np.std(vals[:, :, 1], axis=1))),
        "col_u_std": float(np.mean(np.std(vals[:, :, 0], axis=0))),
    }
