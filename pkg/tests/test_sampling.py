import numpy as np
import pytest

from src.core.errors import ConfigurationError
from src.core.sampling import (
    backward_warp,
    bilinear_sample,
    sample_bilinear,
    translate_fractional,
)


@pytest.fixture
def ramp():
    return np.arange(16, dtype=np.float64).reshape(4, 4, 1)


class TestBilinearSample:
    def test_integer_coordinate_is_exact(self, ramp):
        assert bilinear_sample(ramp, 2.0, 1.0, 0) == ramp[1, 2, 0]

    def test_half_way_between_zero_and_one(self):
        src = np.array([[0.0, 1.0]]).reshape(1, 2, 1)
        assert bilinear_sample(src, 0.5, 0.0, 0) == 0.5

    def test_fully_outside_is_zero(self, ramp):
        assert bilinear_sample(ramp + 1.0, -1.0, -1.0, 0) == 0.0

    def test_vectorised_matches_scalar(self, rng):
        src = rng.standard_normal((5, 6, 2))
        xs = rng.uniform(-1.5, 6.5, (3, 4))
        ys = rng.uniform(-1.5, 5.5, (3, 4))
        out = sample_bilinear(src, xs, ys)
        for y in range(3):
            for x in range(4):
                for c in range(2):
                    assert out[y, x, c] == pytest.approx(bilinear_sample(src, xs[y, x], ys[y, x], c), abs=1e-12)

    def test_coordinate_shape_mismatch(self, ramp):
        with pytest.raises(ConfigurationError):
            sample_bilinear(ramp, np.zeros((2, 2)), np.zeros((2, 3)))


class TestBackwardWarp:
    @pytest.mark.parametrize("dtype", [np.float32, np.float64])
    def test_zero_flow_is_identity(self, rng, dtype):
        src = rng.uniform(0, 1, (6, 5, 3)).astype(dtype)
        out = backward_warp(src, np.zeros((6, 5, 2), dtype=dtype))
        assert out.tobytes() == src.tobytes()

    def test_unit_flow_takes_right_neighbour(self, ramp):
        flow = np.zeros((4, 4, 2))
        flow[..., 0] = 1.0
        out = backward_warp(ramp, flow)
        np.testing.assert_array_equal(out[:, :3], ramp[:, 1:])
        np.testing.assert_array_equal(out[:, 3], 0.0)

    def test_linear_in_source(self, rng):
        s1 = rng.standard_normal((6, 7, 3))
        s2 = rng.standard_normal((6, 7, 3))
        flow = rng.uniform(-2.0, 2.0, (6, 7, 2)) + 0.25
        a, b = 0.7, -1.3
        combined = backward_warp(a * s1 + b * s2, flow)
        separate = a * backward_warp(s1, flow) + b * backward_warp(s2, flow)
        np.testing.assert_allclose(combined, separate, rtol=0, atol=1e-6)

    def test_resolution_mismatch(self, ramp):
        with pytest.raises(ConfigurationError):
            backward_warp(ramp, np.zeros((3, 4, 2)))


class TestTranslate:
    def test_zero_shift_is_identity(self, rng):
        x = rng.standard_normal((4, 5, 2))
        np.testing.assert_array_equal(translate_fractional(x, 0.0, 0.0), x)

    def test_one_column_shift(self, rng):
        x = rng.standard_normal((4, 5, 2))
        out = translate_fractional(x, 1.0, 0.0)
        np.testing.assert_array_equal(out[:, 1:], x[:, :-1])
        np.testing.assert_array_equal(out[:, 0], 0.0)

    def test_there_and_back_keeps_interior(self, rng):
        x = rng.standard_normal((5, 6, 2))
        back = translate_fractional(translate_fractional(x, 1.0, 0.0), -1.0, 0.0)
        np.testing.assert_array_equal(back[:, :-1], x[:, :-1])
        np.testing.assert_array_equal(back[:, -1], 0.0)

    def test_half_pixel_shift_averages(self):
        x = np.array([0.0, 1.0, 0.0, 0.0, 1.0, 0.0]).reshape(1, 6, 1)
        out = translate_fractional(x, 0.5, 0.0)[0, :, 0]
        np.testing.assert_allclose(out, [0.0, 0.5, 0.5, 0.0, 0.5, 0.5])
