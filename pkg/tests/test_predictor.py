"""Strength predictors: forward trace, sharing semantics, gradient check."""

import numpy as np
import pytest

from neurop.nn import finite_diff_check, stats_pool, tanh
from neurop.predictor import (
    PredictorParams,
    predict_strength,
    predictor_train_backward,
    predictor_train_forward,
)


def tiny_predictor(rng, heads=3, shared=True):
    # k3s2p1 convs so small test images stay valid
    return PredictorParams.create(
        rng, heads, c1=2, c2=4, kernel=3, stride=2, padding=1, shared=shared
    )


class TestPredictStrength:
    def test_output_in_open_unit_interval(self, rng):
        params = tiny_predictor(rng)
        for _ in range(10):
            img = rng.random((9, 7, 3), dtype=np.float32)
            v = predict_strength(img, params, 0)
            assert -1.0 < v < 1.0

    def test_zero_head_gives_zero(self, rng):
        params = tiny_predictor(rng)
        params.heads[1].weight[:] = 0.0
        params.heads[1].bias[:] = 0.0
        img = rng.random((8, 8, 3), dtype=np.float32)
        assert predict_strength(img, params, 1) == 0.0

    def test_hand_rolled_forward_trace(self, rng):
        """Full trace with tiny known weights reproduced step by step."""
        from neurop.nn import ConvLayer, FcLayer, conv2d_forward, relu

        params = tiny_predictor(rng, heads=1)
        img = rng.random((4, 4, 3), dtype=np.float32)
        x = img.transpose(2, 0, 1)
        conv1, conv2 = params.backbones[0]
        a1 = relu(conv2d_forward(np.ascontiguousarray(x), conv1))
        f = conv2d_forward(a1, conv2)
        pooled = stats_pool(f)
        s = pooled @ params.heads[0].weight[0] + params.heads[0].bias[0]
        expected = float(np.tanh(s))
        got = predict_strength(img, params, 0)
        np.testing.assert_allclose(got, expected, rtol=1e-5)

    def test_head_index_out_of_range(self, rng):
        params = tiny_predictor(rng)
        img = rng.random((8, 8, 3), dtype=np.float32)
        with pytest.raises(ValueError):
            predict_strength(img, params, 3)

    def test_train_forward_matches_inference(self, rng):
        params = tiny_predictor(rng)
        img = rng.random((10, 12, 3), dtype=np.float32)
        v_inf = predict_strength(img, params, 2)
        v_train, _ = predictor_train_forward(img, params, 2)
        np.testing.assert_allclose(v_inf, v_train, atol=1e-6)


class TestSharing:
    def test_shared_backbone_couples_all_heads(self, rng):
        params = tiny_predictor(rng, shared=True)
        img = rng.random((8, 8, 3), dtype=np.float32)
        before = [predict_strength(img, params, k) for k in range(3)]
        params.backbones[0][0].weight[:] += 0.05
        after = [predict_strength(img, params, k) for k in range(3)]
        assert all(a != b for a, b in zip(before, after))

    def test_private_backbones_are_independent(self, rng):
        params = tiny_predictor(rng, shared=False)
        img = rng.random((8, 8, 3), dtype=np.float32)
        before = [predict_strength(img, params, k) for k in range(3)]
        params.backbones[0][0].weight[:] += 0.05
        after = [predict_strength(img, params, k) for k in range(3)]
        assert after[0] != before[0]
        assert after[1] == before[1] and after[2] == before[2]

    def test_non_shared_roughly_doubles_params(self, rng):
        shared = PredictorParams.create(rng, 3, c1=8, c2=32, kernel=7)
        private = PredictorParams.create(rng, 3, c1=8, c2=32, kernel=7, shared=False)
        backbone = shared.param_count() - 3 * (96 + 1)
        assert private.param_count() == shared.param_count() + 2 * backbone

    def test_batch_context_invariance(self, rng):
        """Predicting an image alone equals predicting it among others."""
        params = tiny_predictor(rng)
        imgs = [rng.random((8, 8, 3), dtype=np.float32) for _ in range(4)]
        alone = predict_strength(imgs[2], params, 0)
        in_batch = [predict_strength(i, params, 0) for i in imgs][2]
        assert alone == in_batch


class TestPredictorGradients:
    def test_full_chain_gradient_check(self, rng):
        """conv -> relu -> conv -> stats pool -> fc -> tanh at 1e-3."""
        from conftest import f64_conv, f64_fc

        params = tiny_predictor(rng, heads=1)
        conv1, conv2 = params.backbones[0]
        params64 = PredictorParams(
            [(f64_conv(conv1), f64_conv(conv2))],
            [f64_fc(params.heads[0])],
            shared=True,
        )
        img = rng.random((8, 9, 3)).astype(np.float64)

        def f():
            v, _ = predictor_train_forward(img, params64, 0)
            return v

        _, cache = predictor_train_forward(img, params64, 0)
        gimg, bb_grads, head_grads = predictor_train_backward(params64, 0, cache, 1.0)
        c1, c2 = params64.backbones[0]
        err = finite_diff_check(
            f,
            [img, c1.weight, c1.bias, c2.weight, c2.bias,
             params64.heads[0].weight, params64.heads[0].bias],
            [gimg] + bb_grads + head_grads,
        )
        assert err < 1e-3
