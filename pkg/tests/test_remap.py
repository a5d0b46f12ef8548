import numpy as np
import pytest

from gridwarp.core import BackwardMap, DomainError, GridField, ImageBuffer
from gridwarp.remap import (fill_holes, invert_forward, lattice_to_backward,
                            resample, upsample_backward)


def identity_backward(w, h, scale=1.0):
    x, y = np.meshgrid(np.arange(w, dtype=float), np.arange(h, dtype=float))
    return BackwardMap(w, h, np.stack([x, y], axis=-1) * scale)


class TestInvertForward:
    def test_identity_field(self):
        field = GridField.uniform(17)
        bm, diag = invert_forward(field, 128, 128)
        ident = identity_backward(128, 128)
        inside = bm.valid
        assert inside.mean() > 0.99
        err = np.abs(bm.values - ident.values)[inside]
        assert err.max() < 1e-6
        assert diag.folded_pixels == 0

    def test_uniform_scale_half(self):
        # field maps source onto the centered half square of UV space;
        # covered target pixels invert to a scale-2 map about the center
        n = 17
        t = np.linspace(0.25, 0.75, n)
        u, v = np.meshgrid(t, t)
        field = GridField(n, np.stack([u, v], axis=-1))
        out = 64
        bm, _ = invert_forward(field, out, out)
        cx = (out - 1) / 2.0
        x, y = np.meshgrid(np.arange(out, dtype=float),
                           np.arange(out, dtype=float))
        expect_x = cx + (x - cx) * 2.0
        expect_y = cx + (y - cx) * 2.0
        inside = bm.valid
        assert 0.15 < inside.mean() < 0.45  # roughly the central quarter
        assert np.abs(bm.values[..., 0] - expect_x)[inside].max() < 1e-6
        assert np.abs(bm.values[..., 1] - expect_y)[inside].max() < 1e-6
        # corners of the output are holes
        assert not bm.valid[0, 0] and not bm.valid[-1, -1]

    def test_folded_cell_diagnosed(self):
        vals = GridField.uniform(5).values.copy()
        # swap two adjacent interior nodes in UV space to fold the cells
        vals[2, 1], vals[2, 2] = vals[2, 2].copy(), vals[2, 1].copy()
        field = GridField(5, vals)
        bm, diag = invert_forward(field, 64, 64)
        assert diag.folded_pixels >= 1

    def test_degenerate_triangles_counted(self):
        vals = GridField.uniform(4).values.copy()
        vals[0, 1] = vals[0, 0]  # collapse one edge
        field = GridField(4, vals)
        _, diag = invert_forward(field, 32, 32)
        assert diag.degenerate_triangles >= 1


class TestRoundTrip:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_forward_backward_identity(self, seed):
        from gridwarp.synth import WarpSpec, make_warp

        kinds = ["cylinder", "fold", "gaussian_bumps"]
        spec = WarpSpec(kinds[seed % 3], amplitude=0.06, seed=seed)
        warp, _ = make_warp(spec, n=33)
        t = np.linspace(0, 1, 33)
        gx, gy = np.meshgrid(t, t)
        field = GridField(33, warp.forward(np.stack([gx, gy], axis=-1)))
        out = 256
        bm, _ = invert_forward(field, out, out, src_size=(out, out))
        rng = np.random.default_rng(seed)
        pts = rng.uniform(0.1, 0.9, size=(50, 2))
        uv = warp.forward(pts) * (out - 1)
        ij = np.clip(np.round(uv).astype(int), 0, out - 1)
        for (px, py), (ix, iy) in zip(pts * (out - 1), ij):
            if not bm.valid[iy, ix]:
                continue
            # nearest-pixel lookup adds <= half-pixel quantization slack
            got = bm.values[iy, ix]
            assert np.linalg.norm(got - [px, py]) < 1.5


class TestFillHoles:
    def test_idempotent_when_full(self):
        bm = identity_backward(16, 16)
        out = fill_holes(bm)
        assert np.array_equal(out.values, bm.values)

    def test_single_interior_hole(self):
        bm = identity_backward(9, 9)
        bm.valid[4, 4] = False
        bm.values[4, 4] = 0
        out = fill_holes(bm)
        assert out.valid.all()
        # nearest covered neighbor is one of the 4-neighbors of (4, 4)
        neighbors = [bm.values[3, 4], bm.values[5, 4],
                     bm.values[4, 3], bm.values[4, 5]]
        assert any(np.array_equal(out.values[4, 4], v) for v in neighbors)

    def test_border_strip(self):
        bm = identity_backward(8, 8)
        bm.valid[:, 0] = False
        out = fill_holes(bm)
        # brute-force nearest non-hole pixel for each hole
        ys, xs = np.nonzero(~bm.valid)
        cov_y, cov_x = np.nonzero(bm.valid)
        for y, x in zip(ys, xs):
            d2 = (cov_y - y) ** 2 + (cov_x - x) ** 2
            best = d2.min()
            cands = [bm.values[cy, cx] for cy, cx, d in
                     zip(cov_y, cov_x, d2) if d == best]
            assert any(np.array_equal(out.values[y, x], c) for c in cands)

    def test_all_holes_rejected(self):
        bm = identity_backward(4, 4)
        bm.valid[:] = False
        with pytest.raises(DomainError):
            fill_holes(bm)


class TestUpsampleBackward:
    def test_identity_scales(self):
        small = identity_backward(128, 128, scale=511.0 / 127.0)
        big = upsample_backward(small, 512, 512)
        ident = identity_backward(512, 512)
        assert np.max(np.abs(big.values - ident.values)) < 1e-6

    def test_linear_ramp_exact(self):
        w, h = 9, 7
        x, y = np.meshgrid(np.arange(w, dtype=float),
                           np.arange(h, dtype=float))
        vals = np.stack([2 * x + 3 * y + 1, x - y], axis=-1)
        bm = BackwardMap(w, h, vals)
        up = upsample_backward(bm, 33, 25)
        tx = np.linspace(0, w - 1, 33)
        ty = np.linspace(0, h - 1, 25)
        gx, gy = np.meshgrid(tx, ty)
        expect = np.stack([2 * gx + 3 * gy + 1, gx - gy], axis=-1)
        assert np.max(np.abs(up.values - expect)) < 1e-9

    def test_matches_direct_bilinear_oracle(self):
        rng = np.random.default_rng(3)
        small = BackwardMap(6, 5, rng.uniform(0, 100, size=(5, 6, 2)))
        up = upsample_backward(small, 17, 13)
        tx = np.linspace(0, 5, 17)
        ty = np.linspace(0, 4, 13)
        for jj, yy in enumerate(ty):
            for ii, xx in enumerate(tx):
                i0 = min(int(xx), 4)
                j0 = min(int(yy), 3)
                fx, fy = xx - i0, yy - j0
                v = ((1 - fx) * (1 - fy) * small.values[j0, i0]
                     + fx * (1 - fy) * small.values[j0, i0 + 1]
                     + (1 - fx) * fy * small.values[j0 + 1, i0]
                     + fx * fy * small.values[j0 + 1, i0 + 1])
                assert np.allclose(up.values[jj, ii], v, atol=1e-12)

    def test_holes_rejected(self):
        bm = identity_backward(8, 8)
        bm.valid[2, 2] = False
        with pytest.raises(DomainError):
            upsample_backward(bm, 16, 16)


class TestResample:
    def test_identity(self):
        rng = np.random.default_rng(0)
        img = ImageBuffer.from_array(
            rng.integers(0, 256, size=(16, 16), dtype=np.uint8))
        out = resample(img, identity_backward(16, 16))
        assert np.array_equal(out.data, img.data)

    def test_constant_map(self):
        rng = np.random.default_rng(1)
        img = ImageBuffer.from_array(
            rng.integers(0, 256, size=(16, 16, 3), dtype=np.uint8))
        vals = np.zeros((8, 8, 2))
        vals[..., 0] = 5.0
        vals[..., 1] = 9.0
        out = resample(img, BackwardMap(8, 8, vals))
        assert np.all(out.data == img.data[9, 5])

    def test_gradient_upscale_analytic(self):
        # src(x, y) = 10 x; sampling at x = k/2 gives 5 k exactly
        x = np.arange(0, 25, dtype=np.uint8)[None, :] * 10
        img = ImageBuffer.from_array(np.repeat(x, 8, axis=0))
        vals = np.zeros((8, 49, 2))
        vals[..., 0] = np.arange(49) / 2.0
        vals[..., 1] = 3.0
        out = resample(img, BackwardMap(49, 8, vals))
        assert np.array_equal(out.data[0], (np.arange(49) * 5).astype(np.uint8))

    def test_range_preserved_and_clamped(self):
        img = ImageBuffer.from_array(
            np.array([[0, 255]], dtype=np.uint8).repeat(2, axis=0))
        vals = np.array([[[-3.0, 0.0], [5.0, 7.0]]])
        out = resample(img, BackwardMap(2, 1, vals))
        assert out.data[0, 0] == 0 and out.data[0, 1] == 255


class TestLatticeToBackward:
    def test_identity_lattice(self):
        n = 9
        t = np.linspace(0, 63, n)
        gx, gy = np.meshgrid(t, t)
        field = GridField(n, np.stack([gx, gy], axis=-1))
        bm = lattice_to_backward(field, 64, 64)
        assert np.max(np.abs(bm.values - identity_backward(64, 64).values)) \
            < 1e-9
