"""The sequential retouching loop.

K operators run in order; before each one, a strength predictor looks at
the downsampled current image. Intermediate images stay unclamped inside
the loop so repeated operators compose cleanly; clamping happens once, on
whatever leaves the pipeline.

Both entry points share one palette-deduplicated chain evaluation, which
makes automatic runs and replays with recorded strengths bit-identical by
construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from neurop import kernels
from neurop.color import NeurOpParams, color_palette, neurop_forward_image, _apply_flat
from neurop.predictor import PredictorParams, predict_strength


@dataclass
class RetouchModel:
    neurops: list  # K NeurOpParams
    predictors: PredictorParams
    downsample_target: int = 256

    @property
    def num_ops(self) -> int:
        return len(self.neurops)

    def validate(self):
        if self.num_ops < 1:
            raise ValueError("model needs at least one operator")
        if self.predictors.num_heads != self.num_ops:
            raise ValueError(
                f"{self.predictors.num_heads} predictor heads for "
                f"{self.num_ops} operators"
            )

    def param_arrays(self):
        arrays = []
        for op in self.neurops:
            arrays += op.param_arrays()
        arrays += self.predictors.param_arrays()
        return arrays

    def param_count(self) -> int:
        return sum(a.size for a in self.param_arrays())


@dataclass
class RetouchResult:
    output: np.ndarray  # clamped [0,1]
    strengths: list
    intermediates: list  # clamped copies of I_1..I_K


def downsample_long_edge(img, target):
    """Bilinear resize so max(H, W) == target, keeping aspect ratio.

    Images already at or below the target pass through unchanged; this
    never upsamples.
    """
    if img.ndim != 3 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"expected a non-empty (H, W, C) image, got {img.shape}")
    if target < 1:
        raise ValueError("target must be >= 1")
    h, w = img.shape[:2]
    long_edge = max(h, w)
    if long_edge <= target:
        return img
    scale = target / long_edge
    if h >= w:
        nh, nw = target, max(1, round(w * scale))
    else:
        nh, nw = max(1, round(h * scale)), target
    return kernels.resize_bilinear(img.astype(np.float32, copy=False), nh, nw)


def clamp01(img):
    return np.clip(img, 0.0, 1.0)


def _check_image(img):
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) image, got shape {img.shape}")


def retouch(img, model: RetouchModel) -> RetouchResult:
    """Predict a strength per operator and apply the chain."""
    _check_image(img)
    model.validate()
    flat = np.ascontiguousarray(img.reshape(-1, 3), dtype=np.float32)
    palette, inverse = color_palette(flat)
    colors = flat if palette is None else palette
    strengths = []
    intermediates = []
    current_full = img.astype(np.float32, copy=False)
    for k, op in enumerate(model.neurops):
        small = downsample_long_edge(current_full, model.downsample_target)
        v = predict_strength(small, model.predictors, k)
        strengths.append(v)
        colors = _apply_flat(colors, v, op)
        full = colors if palette is None else colors[inverse]
        current_full = full.reshape(img.shape)
        intermediates.append(clamp01(current_full))
    return RetouchResult(intermediates[-1], strengths, intermediates)


def retouch_with_strengths(img, model: RetouchModel, strengths):
    """Apply the chain with given strengths, predictors bypassed."""
    _check_image(img)
    model.validate()
    if len(strengths) != model.num_ops:
        raise ValueError(
            f"expected {model.num_ops} strengths, got {len(strengths)}"
        )
    flat = np.ascontiguousarray(img.reshape(-1, 3), dtype=np.float32)
    palette, inverse = color_palette(flat)
    colors = flat if palette is None else palette
    for op, v in zip(model.neurops, strengths):
        colors = _apply_flat(colors, v, op)
    full = colors if palette is None else colors[inverse]
    return clamp01(full.reshape(img.shape))


def run_chain_step(img, model: RetouchModel, k, strength):
    """One operator application on a raw (unclamped) intermediate image."""
    return neurop_forward_image(img, strength, model.neurops[k])


def model_summary(model: RetouchModel) -> dict:
    """Parameter accounting per component plus the total."""
    per_op = [op.param_count() for op in model.neurops]
    pred = model.predictors.param_count()
    head_counts = [h.weight.size + h.bias.size for h in model.predictors.heads]
    backbone = pred - sum(head_counts)
    return {
        "num_ops": model.num_ops,
        "feature_dim": model.neurops[0].feature_dim if model.neurops else 0,
        "per_operator": per_op,
        "operators_total": sum(per_op),
        "predictor_backbone": backbone,
        "predictor_heads": head_counts,
        "predictors_total": pred,
        "total": model.param_count(),
        "backbone_shared": model.predictors.shared,
    }
