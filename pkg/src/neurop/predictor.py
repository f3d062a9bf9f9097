"""Strength predictors: shared conv backbone + per-operator scalar heads.

Each predictor sees a downsampled intermediate image and produces one
scalar in (-1, 1): conv -> ReLU -> conv -> global stats pooling -> FC ->
tanh. By default the two conv layers are shared across all heads; the
non-shared ablation gives every head a private backbone copy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from neurop.nn import (
    ConvLayer,
    FcLayer,
    conv2d_backward,
    conv2d_forward,
    conv2d_forward_train,
    fc_backward,
    fc_forward,
    relu,
    relu_backward,
    stats_pool,
    stats_pool_backward,
    tanh,
    tanh_backward,
)


@dataclass
class PredictorParams:
    backbones: list  # [(conv1, conv2)]; one entry when shared, K when not
    heads: list  # K FcLayers, 3*C2 -> 1
    shared: bool = True

    @property
    def num_heads(self) -> int:
        return len(self.heads)

    def backbone_for(self, k):
        if not 0 <= k < self.num_heads:
            raise ValueError(f"operator index {k} out of range 0..{self.num_heads - 1}")
        return self.backbones[0] if self.shared else self.backbones[k]

    def param_arrays(self):
        arrays = []
        for conv1, conv2 in self.backbones:
            arrays += [conv1.weight, conv1.bias, conv2.weight, conv2.bias]
        for head in self.heads:
            arrays += [head.weight, head.bias]
        return arrays

    def param_count(self) -> int:
        return sum(a.size for a in self.param_arrays())

    def copy(self) -> "PredictorParams":
        bbs = [
            (
                ConvLayer(c1.weight.copy(), c1.bias.copy(), c1.stride, c1.padding),
                ConvLayer(c2.weight.copy(), c2.bias.copy(), c2.stride, c2.padding),
            )
            for c1, c2 in self.backbones
        ]
        heads = [FcLayer(h.weight.copy(), h.bias.copy()) for h in self.heads]
        return PredictorParams(bbs, heads, self.shared)

    @classmethod
    def create(cls, rng, num_heads, c1=8, c2=32, kernel=7, stride=2, padding=1,
               shared=True):
        def backbone():
            return (
                ConvLayer.create(rng, 3, c1, kernel, stride=stride, padding=padding),
                ConvLayer.create(rng, c1, c2, kernel, stride=stride, padding=padding),
            )

        backbones = [backbone()] if shared else [backbone() for _ in range(num_heads)]
        heads = [FcLayer.create(rng, 3 * c2, 1) for _ in range(num_heads)]
        return cls(backbones, heads, shared)


def predict_strength(img_small, params: PredictorParams, k) -> float:
    """Strength for operator k from a downsampled (H, W, 3) image."""
    conv1, conv2 = params.backbone_for(k)
    x = np.ascontiguousarray(img_small.transpose(2, 0, 1))
    a1 = relu(conv2d_forward(x, conv1))
    f = conv2d_forward(a1, conv2)
    pooled = stats_pool(f)
    s = fc_forward(pooled, params.heads[k])
    return float(tanh(s)[0])


def predictor_train_forward(img_small, params: PredictorParams, k):
    """Forward with cached activations; returns (strength, cache)."""
    conv1, conv2 = params.backbone_for(k)
    x = np.ascontiguousarray(img_small.transpose(2, 0, 1))
    y1, cache1 = conv2d_forward_train(x, conv1)
    a1 = relu(y1)
    f, cache2 = conv2d_forward_train(a1, conv2)
    pooled = stats_pool(f)
    s = fc_forward(pooled, params.heads[k])
    v = tanh(s)
    cache = (x, y1, a1, f, cache1, cache2, pooled, v)
    return float(v[0]), cache


def predictor_train_backward(params: PredictorParams, k, cache, grad_v):
    """Backward through head k and its backbone.

    Returns (grad_img_small, backbone_grads, head_grads) where
    backbone_grads is [gw1, gb1, gw2, gb2] for the backbone this head uses.
    """
    conv1, conv2 = params.backbone_for(k)
    x, y1, a1, f, cache1, cache2, pooled, v = cache
    gs = tanh_backward(v, np.asarray([grad_v], dtype=v.dtype))
    gpooled, gw_head, gb_head = fc_backward(pooled, params.heads[k], gs)
    gf = stats_pool_backward(f, gpooled)
    ga1, gw2, gb2 = conv2d_backward(conv2, cache2, gf)
    gy1 = relu_backward(y1, ga1)
    gx, gw1, gb1 = conv2d_backward(conv1, cache1, gy1)
    grad_img = gx.transpose(1, 2, 0)
    return grad_img, [gw1, gb1, gw2, gb2], [gw_head, gb_head]
