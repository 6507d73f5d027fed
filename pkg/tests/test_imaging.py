import numpy as np
import pytest

from splatkit.errors import DegenerateInputError, ParameterError, ShapeError
from splatkit.imaging import blend, gaussian_blur, sobel_magnitude

SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
SOBEL_Y = SOBEL_X.T


def sobel_magnitude_bruteforce(field):
    """Independent oracle: direct 3x3 correlation with replicated edges."""
    f = np.pad(np.asarray(field, dtype=np.float64), 1, mode="edge")
    h, w = field.shape
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            win = f[y : y + 3, x : x + 3]
            gx = (win * SOBEL_X).sum()
            gy = (win * SOBEL_Y).sum()
            out[y, x] = np.hypot(gx, gy)
    return out


class TestSobelMagnitude:
    def test_constant_field_is_zero(self):
        assert np.all(sobel_magnitude(np.full((6, 7), 0.4)) == 0.0)

    def test_vertical_step_response(self):
        # step of height h between two constant halves: magnitude 4h on the
        # two columns adjacent to the step (interior rows)
        h = 0.25
        field = np.zeros((8, 10))
        field[:, 5:] = h
        mag = sobel_magnitude(field)
        assert np.allclose(mag[1:-1, 4], 4 * h)
        assert np.allclose(mag[1:-1, 5], 4 * h)
        assert np.allclose(mag[1:-1, :4], 0.0)
        assert np.allclose(mag[1:-1, 6:], 0.0)

    def test_matches_bruteforce_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            field = rng.random((9, 12))
            assert np.allclose(sobel_magnitude(field), sobel_magnitude_bruteforce(field), atol=1e-12)

    def test_constant_shift_invariance(self):
        rng = np.random.default_rng(3)
        field = rng.random((7, 7))
        assert np.allclose(sobel_magnitude(field), sobel_magnitude(field + 2.5), atol=1e-12)

    def test_non_negative(self):
        rng = np.random.default_rng(4)
        assert sobel_magnitude(rng.standard_normal((5, 5))).min() >= 0.0

    def test_too_small_raises(self):
        with pytest.raises(DegenerateInputError):
            sobel_magnitude(np.zeros((2, 5)))


def gaussian_kernel_1d(sigma):
    """Oracle kernel: sampled Gaussian, radius ceil(3*sigma), normalized."""
    r = int(np.ceil(3 * sigma))
    x = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-(x ** 2) / (2 * sigma ** 2))
    return k / k.sum()


class TestGaussianBlur:
    def test_sigma_zero_is_identity(self):
        m = np.random.default_rng(0).random((6, 6)).astype(np.float32)
        out = gaussian_blur(m, 0.0)
        assert np.array_equal(out, m)

    def test_constant_preserved(self):
        out = gaussian_blur(np.full((9, 9), 0.37), 2.0)
        assert np.allclose(out, 0.37, atol=1e-12)

    def test_impulse_center_tap(self):
        # center of the blurred impulse equals the 2D kernel's center tap,
        # i.e. the squared 1D center tap
        m = np.zeros((15, 15))
        m[7, 7] = 1.0
        out = gaussian_blur(m, 1.0)
        k = gaussian_kernel_1d(1.0)
        assert out[7, 7] == pytest.approx(k[3] ** 2, abs=1e-12)

    def test_impulse_matches_kernel_everywhere(self):
        m = np.zeros((15, 15))
        m[7, 7] = 1.0
        out = gaussian_blur(m, 1.0)
        k = gaussian_kernel_1d(1.0)
        assert np.allclose(out[4:11, 4:11], np.outer(k, k), atol=1e-12)

    def test_interior_mass_preserved(self):
        m = np.zeros((30, 30))
        m[12:18, 12:18] = np.random.default_rng(5).random((6, 6))
        out = gaussian_blur(m, 1.5)
        assert out.sum() == pytest.approx(m.sum(), rel=1e-6)

    def test_negative_sigma_raises(self):
        with pytest.raises(ParameterError):
            gaussian_blur(np.zeros((4, 4)), -0.1)


class TestBlend:
    def setup_method(self):
        rng = np.random.default_rng(7)
        self.a = rng.random((5, 6, 3)).astype(np.float32)
        self.b = rng.random((5, 6, 3)).astype(np.float32)

    def test_full_weight_returns_a(self):
        assert np.array_equal(blend(self.a, self.b, np.ones((5, 6))), self.a)

    def test_zero_weight_returns_b(self):
        assert np.array_equal(blend(self.a, self.b, np.zeros((5, 6))), self.b)

    def test_equal_inputs_fixed_point(self):
        w = np.random.default_rng(8).random((5, 6))
        assert np.array_equal(blend(self.a, self.a, w), self.a)

    def test_output_within_input_range(self):
        w = np.random.default_rng(9).random((5, 6)).astype(np.float32)
        out = blend(self.a, self.b, w)
        lo = np.minimum(self.a, self.b)
        hi = np.maximum(self.a, self.b)
        assert np.all(out >= lo - 1e-7)
        assert np.all(out <= hi + 1e-7)

    def test_shape_mismatch_raises(self):
        with pytest.raises(ShapeError):
            blend(self.a, self.b, np.ones((4, 6)))
        with pytest.raises(ShapeError):
            blend(self.a, self.b[:, :5], np.ones((5, 6)))
