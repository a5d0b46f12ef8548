import numpy as np
import pytest

from gridwarp.core import DomainError, GridField, ImageBuffer
from gridwarp.metrics import (MSSSIM_WEIGHTS, WINDOW_SIGMA, WINDOW_SIZE,
                              gaussian_window, grid_diagnostics,
                              local_distortion, ms_ssim)


def reference_ms_ssim(a, b):
    """Independent oracle: sliding-window SSIM plus block-mean pyramid."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    g1 = gaussian_window(WINDOW_SIZE, WINDOW_SIGMA)
    kernel = np.outer(g1, g1)
    c1 = (0.01 * 255) ** 2
    c2 = (0.03 * 255) ** 2

    def windows(img):
        return np.lib.stride_tricks.sliding_window_view(
            img, (WINDOW_SIZE, WINDOW_SIZE))

    def components(x, y):
        wx = windows(x)
        wy = windows(y)
        mx = np.einsum("ijkl,kl->ij", wx, kernel)
        my = np.einsum("ijkl,kl->ij", wy, kernel)
        mxx = np.einsum("ijkl,kl->ij", wx * wx, kernel)
        myy = np.einsum("ijkl,kl->ij", wy * wy, kernel)
        mxy = np.einsum("ijkl,kl->ij", wx * wy, kernel)
        vx = mxx - mx * mx
        vy = myy - my * my
        cov = mxy - mx * my
        lum = (2 * mx * my + c1) / (mx * mx + my * my + c1)
        cs = (2 * cov + c2) / (vx + vy + c2)
        return lum.mean(), cs.mean(), (lum * cs).mean()

    def pool(img):
        h, w = img.shape
        img = img[: h - h % 2, : w - w % 2]
        return img.reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))

    score = 1.0
    for level, weight in enumerate(MSSSIM_WEIGHTS):
        lum, cs, full = components(a, b)
        if level < len(MSSSIM_WEIGHTS) - 1:
            score *= max(cs, 0.0) ** weight
            a, b = pool(a), pool(b)
        else:
            score *= max(full, 0.0) ** weight
    return score


def random_image(rng, side=176, smooth=True):
    img = rng.uniform(0, 255, size=(side, side))
    if smooth:
        from scipy import ndimage
        img = ndimage.gaussian_filter(img, 3.0)
        img = 255 * (img - img.min()) / (np.ptp(img) + 1e-9)
    return img


class TestMsSsim:
    def test_identical(self):
        rng = np.random.default_rng(0)
        img = random_image(rng)
        assert ms_ssim(img, img) == pytest.approx(1.0, abs=1e-9)

    def test_negative_image_scores_low(self):
        rng = np.random.default_rng(1)
        img = random_image(rng)
        assert ms_ssim(img, 255 - img) < 0.2

    def test_translated_copy(self):
        rng = np.random.default_rng(2)
        img = random_image(rng, side=200)
        shifted = np.roll(img, 1, axis=1)
        score = ms_ssim(img[:, 1:177], shifted[:, 1:177])
        assert 0 < score < 1
        ref = reference_ms_ssim(img[:, 1:177], shifted[:, 1:177])
        assert score == pytest.approx(ref, abs=1e-3)

    def test_symmetry(self):
        rng = np.random.default_rng(3)
        a = random_image(rng)
        b = random_image(rng)
        assert abs(ms_ssim(a, b) - ms_ssim(b, a)) < 1e-12

    def test_size_floor(self):
        img = np.zeros((100, 100))
        with pytest.raises(DomainError):
            ms_ssim(img, img)

    def test_mismatched_shapes(self):
        with pytest.raises(DomainError):
            ms_ssim(np.zeros((176, 176)), np.zeros((176, 180)))

    def test_accepts_image_buffers(self):
        rng = np.random.default_rng(4)
        arr = rng.integers(0, 256, size=(176, 176), dtype=np.uint8)
        buf = ImageBuffer.from_array(arr)
        assert ms_ssim(buf, buf) == pytest.approx(1.0, abs=1e-9)


class TestLocalDistortion:
    def test_identical(self):
        f = np.zeros((8, 8, 2))
        assert local_distortion(f, f) == 0.0

    def test_345(self):
        ref = np.zeros((8, 8, 2))
        est = ref + [3.0, 4.0]
        assert local_distortion(est, ref) == pytest.approx(5.0)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(5)
        a = rng.normal(size=(6, 7, 2))
        b = rng.normal(size=(6, 7, 2))
        total = 0.0
        for j in range(6):
            for i in range(7):
                total += np.hypot(a[j, i, 0] - b[j, i, 0],
                                  a[j, i, 1] - b[j, i, 1])
        assert local_distortion(a, b) == pytest.approx(total / 42)

    def test_valid_mask(self):
        a = np.zeros((4, 4, 2))
        b = a + [0.0, 2.0]
        mask = np.zeros((4, 4), dtype=bool)
        mask[0, 0] = True
        assert local_distortion(a, b, valid=mask) == pytest.approx(2.0)
        with pytest.raises(DomainError):
            local_distortion(a, b, valid=np.zeros((4, 4), dtype=bool))

    def test_zero_iff_equal(self):
        rng = np.random.default_rng(6)
        a = rng.normal(size=(5, 5, 2))
        assert local_distortion(a, a) == 0.0
        assert local_distortion(a, a + 1e-9) > 0


class TestGridDiagnostics:
    def test_uniform_grid(self):
        d = grid_diagnostics(GridField.uniform(9))
        assert d["fold_count"] == 0
        assert d["row_v_std"] == pytest.approx(0.0)
        assert d["col_u_std"] == pytest.approx(0.0)
        assert d["min_cell_area"] > 0

    def test_swapped_nodes_fold(self):
        vals = GridField.uniform(6).values.copy()
        vals[3, 2], vals[3, 3] = vals[3, 3].copy(), vals[3, 2].copy()
        d = grid_diagnostics(GridField(6, vals))
        assert d["fold_count"] >= 1

    def test_fold_count_matches_brute_force(self):
        rng = np.random.default_rng(7)
        n = 10
        vals = GridField.uniform(n).values + rng.normal(0, 0.08, (n, n, 2))
        field = GridField(n, vals)
        d = grid_diagnostics(field)
        count = 0
        for j in range(n - 1):
            for i in range(n - 1):
                e1 = vals[j, i + 1] - vals[j, i]
                e2 = vals[j + 1, i] - vals[j, i]
                if e1[0] * e2[1] - e1[1] * e2[0] < 0:
                    count += 1
        assert d["fold_count"] == count

    def test_translation_invariance(self):
        rng = np.random.default_rng(8)
        n = 8
        vals = GridField.uniform(n).values + rng.normal(0, 0.1, (n, n, 2))
        d1 = grid_diagnostics(GridField(n, vals))
        d2 = grid_diagnostics(GridField(n, vals + 3.7))
        assert d1["fold_count"] == d2["fold_count"]
