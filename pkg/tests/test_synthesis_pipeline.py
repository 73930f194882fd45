import numpy as np
import pytest

from src.core.errors import ConfigurationError, InputValidationError
from src.services.pipeline import interpolate_midframe, validate_frames
from src.services.synthesis import (
    SynthesisInputs,
    compose_frame,
    final_occlusion,
    synthnet_forward,
)


def _contexts(rng, size, widths):
    h, w = size
    pairs = []
    for k, c in enumerate(widths):
        shape = (h >> (3 - k), w >> (3 - k), c)
        pairs.append((rng.standard_normal(shape), rng.standard_normal(shape)))
    return tuple(pairs)


class TestSynthNet:
    def test_output_shapes(self, small_model, rng):
        # small widths: context levels 1/8, 1/4, 1/2 carry 6, 4, 4 channels
        inputs = SynthesisInputs(
            warped0=rng.uniform(0, 1, (64, 64, 3)),
            warped1=rng.uniform(0, 1, (64, 64, 3)),
            occlusion=rng.uniform(0, 1, (64, 64, 1)),
            warped_contexts=_contexts(rng, (64, 64), (6, 4, 4)),
        )
        residual, delta_o = synthnet_forward(inputs, small_model.synth)
        assert residual.shape == (64, 64, 3)
        assert delta_o.shape == (64, 64, 1)

    def test_zero_weights(self, zero_model, rng):
        inputs = SynthesisInputs(
            warped0=rng.uniform(0, 1, (32, 32, 3)),
            warped1=rng.uniform(0, 1, (32, 32, 3)),
            occlusion=np.full((32, 32, 1), 0.5),
            warped_contexts=_contexts(rng, (32, 32), (6, 4, 4)),
        )
        residual, delta_o = synthnet_forward(inputs, zero_model.synth)
        assert not residual.any() and not delta_o.any()

    def test_context_resolution_checked(self, small_model, rng):
        inputs = SynthesisInputs(
            warped0=np.zeros((64, 64, 3)),
            warped1=np.zeros((64, 64, 3)),
            occlusion=np.zeros((64, 64, 1)),
            warped_contexts=_contexts(rng, (32, 32), (6, 4, 4)),
        )
        with pytest.raises(ConfigurationError):
            synthnet_forward(inputs, small_model.synth)

    def test_needs_three_context_pairs(self):
        with pytest.raises(ConfigurationError):
            SynthesisInputs(np.zeros((8, 8, 3)), np.zeros((8, 8, 3)), np.zeros((8, 8, 1)), ())


class TestCompose:
    @pytest.fixture
    def frames(self, rng):
        return rng.uniform(0, 1, (4, 5, 3)), rng.uniform(0, 1, (4, 5, 3))

    def test_full_occlusion_picks_first_frame(self, frames):
        a, b = frames
        out = compose_frame(a, b, np.ones((4, 5, 1)), np.zeros((4, 5, 1)), np.zeros((4, 5, 3)))
        np.testing.assert_array_equal(out, a)

    def test_zero_occlusion_picks_second_frame(self, frames):
        a, b = frames
        out = compose_frame(a, b, np.zeros((4, 5, 1)), np.zeros((4, 5, 1)), np.zeros((4, 5, 3)))
        np.testing.assert_array_equal(out, b)

    def test_half_occlusion_averages(self, frames):
        a, b = frames
        out = compose_frame(a, b, np.full((4, 5, 1), 0.5), np.zeros((4, 5, 1)), np.zeros((4, 5, 3)))
        np.testing.assert_allclose(out, 0.5 * (a + b), rtol=0, atol=1e-15)

    def test_final_occlusion_is_clamped(self):
        occ = np.array([0.2, 0.9, 0.5]).reshape(1, 3, 1)
        delta = np.array([-0.5, 0.4, 0.1]).reshape(1, 3, 1)
        np.testing.assert_allclose(final_occlusion(occ, delta)[0, :, 0], [0.0, 1.0, 0.6])

    def test_clamp_output(self, frames):
        a, b = frames
        residual = np.full((4, 5, 3), 2.0)
        out = compose_frame(a, b, np.ones((4, 5, 1)), np.zeros((4, 5, 1)), residual, clamp_output=True)
        assert np.all(out == 1.0)

    def test_linear_before_clamping(self, rng):
        occ = rng.uniform(0, 1, (4, 5, 1))
        delta = rng.uniform(-0.3, 0.3, (4, 5, 1))
        a0, b0, r0 = (rng.standard_normal((4, 5, 3)) for _ in range(3))
        a1, b1, r1 = (rng.standard_normal((4, 5, 3)) for _ in range(3))
        s, t = 1.7, -0.4
        mixed = compose_frame(s * a0 + t * a1, s * b0 + t * b1, occ, delta, s * r0 + t * r1)
        expected = s * compose_frame(a0, b0, occ, delta, r0) + t * compose_frame(a1, b1, occ, delta, r1)
        np.testing.assert_allclose(mixed, expected, rtol=0, atol=1e-12)

    def test_occlusion_out_of_range(self, frames):
        a, b = frames
        with pytest.raises(ConfigurationError):
            compose_frame(a, b, np.full((4, 5, 1), 1.5), np.zeros((4, 5, 1)), np.zeros((4, 5, 3)))


class TestInterpolateMidframe:
    def test_identical_frames_with_zero_weights(self, zero_model, small_config, texture):
        frame = texture(64, 64).astype(np.float32)
        out, diag = interpolate_midframe(frame, frame, zero_model, small_config.pyramid)
        np.testing.assert_allclose(out, frame, atol=1e-6)
        assert not diag.field0.any() and not diag.field1.any()
        np.testing.assert_allclose(diag.occlusion, 0.5)

    def test_resolution_chain(self, small_model, small_config, rng):
        frames = rng.uniform(0, 1, (2, 64, 64, 3)).astype(np.float32)
        out, diag = interpolate_midframe(frames[0], frames[1], small_model, small_config.pyramid)
        assert out.shape == (64, 64, 3)
        assert [pair[0].shape[:2] for pair in diag.trace] == [(8, 8), (16, 16), (32, 32), (64, 64)]
        assert diag.field0.shape == (64, 64, 2)
        assert diag.residual.shape == (64, 64, 3)
        assert np.isfinite(out).all() and out.min() >= 0.0 and out.max() <= 1.0
        assert diag.occlusion_final.min() >= 0.0 and diag.occlusion_final.max() <= 1.0

    def test_padding_round_trip(self, small_model, small_config, rng):
        frames = rng.uniform(0, 1, (2, 100, 68, 3)).astype(np.float32)
        out, diag = interpolate_midframe(frames[0], frames[1], small_model, small_config.pyramid)
        assert out.shape == (100, 68, 3)
        assert diag.padded_shape == (104, 72)
        assert diag.occlusion.shape == (100, 68, 1)

    def test_float64_precision(self, small_model, small_config, rng):
        frames = rng.uniform(0, 1, (2, 32, 32, 3))
        out, _ = interpolate_midframe(frames[0], frames[1], small_model, small_config.pyramid, precision="float64")
        assert out.dtype == np.float64

    def test_size_mismatch(self, small_model, small_config):
        with pytest.raises(InputValidationError):
            interpolate_midframe(np.zeros((64, 64, 3)), np.zeros((64, 63, 3)), small_model, small_config.pyramid)

    @pytest.mark.parametrize(
        "frame",
        [np.zeros((8, 8, 1)), np.full((8, 8, 3), 1.5), np.full((8, 8, 3), np.nan)],
        ids=["channels", "range", "non-finite"],
    )
    def test_validation(self, frame):
        with pytest.raises(InputValidationError):
            validate_frames(frame, np.zeros((8, 8, 3)))
