import numpy as np
import pytest

from splatkit.refine import fill_pushpull


class TestFillPushPull:
    def test_full_mask_is_identity(self):
        img = np.random.default_rng(0).random((13, 17, 3)).astype(np.float32)
        out = fill_pushpull(img, np.ones((13, 17)))
        assert np.array_equal(out, img)

    def test_constant_image_fills_constant(self):
        img = np.full((16, 16, 3), 0.625, dtype=np.float32)
        mask = np.zeros((16, 16))
        mask[2:5, 3:9] = 1.0
        out = fill_pushpull(img * mask[:, :, None], mask)
        assert np.allclose(out, 0.625, atol=1e-6)

    def test_single_pixel_hole_within_range(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            h = int(rng.integers(6, 24))
            w = int(rng.integers(6, 24))
            img = rng.random((h, w, 3)).astype(np.float32)
            mask = np.ones((h, w))
            hy, hx = int(rng.integers(0, h)), int(rng.integers(0, w))
            mask[hy, hx] = 0.0
            holed = img * mask[:, :, None]
            out = fill_pushpull(holed, mask)
            valid = mask > 0.5
            for c in range(3):
                v = out[hy, hx, c]
                assert img[:, :, c][valid].min() - 1e-6 <= v <= img[:, :, c][valid].max() + 1e-6

    def test_valid_pixels_bitwise_preserved(self):
        rng = np.random.default_rng(2)
        img = rng.random((20, 20, 3)).astype(np.float32)
        mask = (rng.random((20, 20)) > 0.4).astype(np.float32)
        out = fill_pushpull(img, mask)
        sel = mask > 0.5
        assert np.array_equal(out[sel], img[sel])

    def test_all_invalid_returns_mean_color(self):
        img = np.zeros((8, 8, 3), dtype=np.float32)
        img[:, :, 1] = 0.5
        out = fill_pushpull(img, np.zeros((8, 8)))
        assert np.allclose(out[:, :, 0], 0.0)
        assert np.allclose(out[:, :, 1], 0.5)

    def test_output_always_finite(self):
        rng = np.random.default_rng(3)
        for seed in range(20):
            r = np.random.default_rng(seed)
            img = r.random((11, 7, 2)).astype(np.float32)
            mask = (r.random((11, 7)) > 0.8).astype(np.float32)
            out = fill_pushpull(img * mask[:, :, None], mask)
            assert np.all(np.isfinite(out))

    def test_idempotent_on_complete_result(self):
        rng = np.random.default_rng(4)
        img = rng.random((12, 12, 3)).astype(np.float32)
        mask = (rng.random((12, 12)) > 0.5).astype(np.float32)
        filled = fill_pushpull(img * mask[:, :, None], mask)
        again = fill_pushpull(filled, np.ones((12, 12)))
        assert np.array_equal(filled, again)

    def test_two_channel_and_grayscale(self):
        img = np.random.default_rng(5).random((9, 9)).astype(np.float32)
        mask = np.ones((9, 9))
        mask[4, 4] = 0.0
        out = fill_pushpull(img, mask)
        assert out.shape == (9, 9)
        assert np.isfinite(out[4, 4])
