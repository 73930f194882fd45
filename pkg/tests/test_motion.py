import numpy as np
import pytest

from src.core.errors import ConfigurationError, ContractViolation
from src.core.gradcheck import finite_diff_check
from src.core.tensor import ConvSpec
from src.services.checks import CONVEX_OP, naive_convex_upsample
from src.services.correlation import CorrelationVolume, PyramidConfig, channel_meta
from src.services.motion import (
    HEAD_CHANNELS,
    LOGIT_CHANNELS,
    UPSAMPLE_TAPS,
    UpBlockWeights,
    convex_upsample,
    extract_context_pyramid,
    mgm_generate,
    run_mrm,
    upblock_step,
)


def _conv(rng, out_c, in_c, k=3, scale=0.2):
    kernel = np.zeros((out_c, in_c, k, k)) if rng is None else rng.standard_normal((out_c, in_c, k, k)) * scale
    return ConvSpec.same(kernel, np.zeros(out_c))


def _upblock(rng, ctx_c, hidden_c=4, trunk_c=6, with_hidden=False, zero_head=False):
    trunk_in = 4 + 2 * ctx_c + (hidden_c if with_hidden else 0)
    return UpBlockWeights(
        trunk=(_conv(rng, trunk_c, trunk_in), _conv(rng, trunk_c, trunk_c)),
        head=_conv(None if zero_head else rng, HEAD_CHANNELS, trunk_c),
        hidden_out=_conv(rng, hidden_c, trunk_c),
        hidden_in=_conv(rng, hidden_c, hidden_c) if with_hidden else None,
    )


class TestContextAndGeneration:
    def test_context_pyramid_levels(self, small_model, rng):
        pyramid = extract_context_pyramid(rng.uniform(0, 1, (64, 64, 3)), small_model.context)
        assert [lvl.shape[:2] for lvl in pyramid.levels] == [(8, 8), (16, 16), (32, 32)]

    def test_context_pyramid_non_square(self, small_model):
        pyramid = extract_context_pyramid(np.zeros((128, 96, 3)), small_model.context)
        assert [lvl.shape[:2] for lvl in pyramid.levels] == [(16, 12), (32, 24), (64, 48)]
        assert all(not lvl.any() for lvl in pyramid.levels)

    def test_mgm_shapes_and_determinism(self, small_model, small_config, rng):
        n = small_config.pyramid.channels_per_direction
        meta = channel_meta(small_config.pyramid, 0) + channel_meta(small_config.pyramid, 1)
        dqbc = CorrelationVolume(rng.standard_normal((8, 8, 2 * n)).astype(np.float32), meta)
        frames = rng.uniform(0, 1, (2, 64, 64, 3)).astype(np.float32)
        m0, m1 = mgm_generate(dqbc, frames[0], frames[1], small_model.mgm)
        assert m0.shape == (8, 8, 2) and m1.shape == (8, 8, 2)
        again = mgm_generate(dqbc, frames[0], frames[1], small_model.mgm)
        assert m0.tobytes() == again[0].tobytes() and m1.tobytes() == again[1].tobytes()

    def test_mgm_zero_weights(self, zero_model, small_config, rng):
        n = small_config.pyramid.channels_per_direction
        meta = channel_meta(small_config.pyramid, 0) * 2
        dqbc = CorrelationVolume(rng.standard_normal((8, 8, 2 * n)), meta)
        m0, m1 = mgm_generate(dqbc, np.ones((64, 64, 3)), np.ones((64, 64, 3)), zero_model.mgm)
        assert not m0.any() and not m1.any()

    def test_mgm_resolution_mismatch(self, small_model, small_config, rng):
        n = small_config.pyramid.channels_per_direction
        meta = channel_meta(small_config.pyramid, 0) * 2
        dqbc = CorrelationVolume(rng.standard_normal((4, 4, 2 * n)), meta)
        with pytest.raises(ConfigurationError):
            mgm_generate(dqbc, np.zeros((64, 64, 3)), np.zeros((64, 64, 3)), small_model.mgm)


class TestConvexUpsample:
    def test_one_hot_centre_replicates_doubled(self, rng):
        field = rng.standard_normal((3, 4, 2))
        logits = np.zeros((3, 4, LOGIT_CHANNELS))
        logits[:, :, 4::UPSAMPLE_TAPS] = 1000.0
        out = convex_upsample(field, logits)
        np.testing.assert_array_equal(out, 2 * np.repeat(np.repeat(field, 2, axis=0), 2, axis=1))

    def test_uniform_logits_on_constant_interior(self):
        field = np.zeros((5, 5, 2))
        field[..., 0] = 1.5
        field[..., 1] = -0.5
        out = convex_upsample(field, np.zeros((5, 5, LOGIT_CHANNELS)))
        # away from the zero-padded border every tap sees the constant
        np.testing.assert_allclose(out[2:8, 2:8, 0], 3.0)
        np.testing.assert_allclose(out[2:8, 2:8, 1], -1.0)

    def test_matches_weighted_sum_oracle(self, rng):
        field = rng.standard_normal((4, 3, 2))
        logits = rng.standard_normal((4, 3, LOGIT_CHANNELS)) * 3.0
        out = convex_upsample(field, logits)
        np.testing.assert_allclose(out, naive_convex_upsample(field, logits), atol=1e-6)

    def test_bounded_by_neighbourhood(self, rng):
        field = rng.standard_normal((4, 4, 2))
        out = convex_upsample(field, rng.standard_normal((4, 4, LOGIT_CHANNELS)))
        padded = np.pad(field, ((1, 1), (1, 1), (0, 0)))
        for y in range(4):
            for x in range(4):
                nb = padded[y : y + 3, x : x + 3].reshape(9, 2)
                fine = out[2 * y : 2 * y + 2, 2 * x : 2 * x + 2].reshape(4, 2)
                assert np.all(fine <= 2 * nb.max(axis=0) + 1e-12)
                assert np.all(fine >= 2 * nb.min(axis=0) - 1e-12)

    def test_adjoint(self, rng):
        err = finite_diff_check(CONVEX_OP, [rng.standard_normal((3, 2, 2)), rng.standard_normal((3, 2, LOGIT_CHANNELS))])
        assert err < 1e-5

    def test_wrong_logit_count(self):
        with pytest.raises(ConfigurationError):
            convex_upsample(np.zeros((2, 2, 2)), np.zeros((2, 2, 9)))


class TestUpBlock:
    def test_first_block_doubles_resolution(self, rng):
        weights = _upblock(rng, ctx_c=3)
        fields = (rng.standard_normal((8, 8, 2)), rng.standard_normal((8, 8, 2)))
        ctx = rng.standard_normal((2, 8, 8, 3))
        out = upblock_step(1, fields, ctx[0], ctx[1], None, weights)
        assert out.field0.shape == (16, 16, 2)
        assert out.field1.shape == (16, 16, 2)
        assert out.hidden.shape == (16, 16, 4)

    def test_zero_head_is_uniform_convex_upsample(self, rng):
        weights = _upblock(rng, ctx_c=3, zero_head=True)
        fields = (rng.standard_normal((4, 4, 2)), rng.standard_normal((4, 4, 2)))
        ctx = rng.standard_normal((2, 4, 4, 3))
        out = upblock_step(1, fields, ctx[0], ctx[1], None, weights)
        uniform = np.zeros((4, 4, LOGIT_CHANNELS))
        np.testing.assert_allclose(out.field0, convex_upsample(fields[0], uniform), atol=1e-12)
        np.testing.assert_allclose(out.field1, convex_upsample(fields[1], uniform), atol=1e-12)

    def test_hidden_state_contract(self, rng):
        fields = (np.zeros((4, 4, 2)), np.zeros((4, 4, 2)))
        ctx = np.zeros((4, 4, 3))
        with pytest.raises(ContractViolation):
            upblock_step(1, fields, ctx, ctx, np.zeros((4, 4, 4)), _upblock(rng, 3))
        with pytest.raises(ContractViolation):
            upblock_step(2, fields, ctx, ctx, None, _upblock(rng, 3, with_hidden=True))
        with pytest.raises(ContractViolation):
            upblock_step(4, fields, ctx, ctx, None, _upblock(rng, 3))

    def test_head_width_checked(self, rng):
        with pytest.raises(ConfigurationError):
            UpBlockWeights(trunk=(_conv(rng, 6, 10), _conv(rng, 6, 6)), head=_conv(rng, 36, 6), hidden_out=_conv(rng, 4, 6))


class TestRunMRM:
    def test_full_chain(self, small_model, rng):
        frames = rng.uniform(0, 1, (2, 64, 64, 3))
        ctx0 = extract_context_pyramid(frames[0], small_model.context)
        ctx1 = extract_context_pyramid(frames[1], small_model.context)
        coarse = (rng.standard_normal((8, 8, 2)), rng.standard_normal((8, 8, 2)))
        result = run_mrm(coarse, ctx0, ctx1, small_model.mrm)

        assert result.field0.shape == (64, 64, 2)
        assert result.occlusion.shape == (64, 64, 1)
        assert result.occlusion.min() >= 0.0 and result.occlusion.max() <= 1.0
        assert [pair[0].shape[:2] for pair in result.trace] == [(8, 8), (16, 16), (32, 32), (64, 64)]
        assert [pair[0].shape[:2] for pair in result.warped_contexts] == [(8, 8), (16, 16), (32, 32)]

        again = run_mrm(coarse, ctx0, ctx1, small_model.mrm)
        assert again.field0.tobytes() == result.field0.tobytes()
        assert again.occlusion.tobytes() == result.occlusion.tobytes()

    def test_zero_weights_double_constant_interior(self, zero_model):
        ctx = extract_context_pyramid(np.zeros((64, 64, 3)), zero_model.context)
        coarse = (np.full((8, 8, 2), 0.25), np.full((8, 8, 2), -0.5))
        result = run_mrm(coarse, ctx, ctx, zero_model.mrm)
        # interior vectors double per block: 0.25 -> 2.0 after three blocks
        np.testing.assert_allclose(result.field0[28:36, 28:36], 2.0)
        np.testing.assert_allclose(result.field1[28:36, 28:36], -4.0)
        np.testing.assert_allclose(result.occlusion, 0.5)
