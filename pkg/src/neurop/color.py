"""Scalar-strength color operators.

A learned operator maps one RGB color to another under a scalar strength
v: encode to a feature vector, translate by v along the all-ones
direction, decode back to RGB. Applying it to an image is a pure per-pixel
map, so identical input colors always produce identical output colors —
the image path exploits that by evaluating each distinct color once when
the image is 8/16-bit quantized.

Outputs are deliberately not clamped here; clamping happens only where an
image leaves the pipeline.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from neurop import kernels
from neurop.nn import FcLayer, fc_backward, fc_forward, relu, relu_backward

DEFAULT_FEATURE_DIM = 64

# pixel count below which palette dedup costs more than it saves
_MEMOIZE_MIN_PIXELS = 1 << 16


@dataclass
class NeurOpParams:
    """Encoder/decoder weights of one color operator."""

    encoder: FcLayer  # 3 -> F
    decoder_hidden: FcLayer  # F -> F, ReLU
    decoder_out: FcLayer  # F -> 3

    @property
    def feature_dim(self) -> int:
        return self.encoder.out_dim

    def param_arrays(self):
        return [
            self.encoder.weight, self.encoder.bias,
            self.decoder_hidden.weight, self.decoder_hidden.bias,
            self.decoder_out.weight, self.decoder_out.bias,
        ]

    def param_count(self) -> int:
        return sum(p.size for p in self.param_arrays())

    def copy(self) -> "NeurOpParams":
        return NeurOpParams(
            FcLayer(self.encoder.weight.copy(), self.encoder.bias.copy()),
            FcLayer(self.decoder_hidden.weight.copy(), self.decoder_hidden.bias.copy()),
            FcLayer(self.decoder_out.weight.copy(), self.decoder_out.bias.copy()),
        )

    @classmethod
    def create(cls, rng, feature_dim=DEFAULT_FEATURE_DIM, scheme="identity"):
        if scheme == "gaussian":
            return cls(
                FcLayer.create(rng, 3, feature_dim),
                FcLayer.create(rng, feature_dim, feature_dim),
                FcLayer.create(rng, feature_dim, 3),
            )
        if scheme == "identity":
            return _identity_init(rng, feature_dim)
        raise ValueError(f"unknown init scheme {scheme!r}")


# initial slope of the color response w.r.t. strength; real retouching
# operators move colors noticeably less than one unit per strength unit
_TRANSLATION_GAIN = 0.3


def _identity_init(rng, f):
    """Near-identity operator with a spread of ReLU kinks over the strength range.

    The first three feature channels carry the color straight through
    (decode(encode(p)) == p up to tiny noise) with an initial strength
    response of _TRANSLATION_GAIN per unit v; the remaining channels see
    scaled color components plus the translation, with hidden biases
    spread so their ReLU kinks tile strengths in [-2, 2]. That gives the
    optimizer a ready piecewise-linear basis in (color, strength) instead
    of a dead start.
    """
    enc_w = rng.normal(0.0, 0.01, size=(f, 3)).astype(np.float32)
    enc_b = rng.normal(0.0, 0.01, size=f).astype(np.float32)
    hid_w = (np.eye(f) + rng.normal(0.0, 0.01, size=(f, f))).astype(np.float32)
    hid_b = rng.normal(0.0, 0.01, size=f).astype(np.float32)
    out_w = rng.normal(0.0, 0.002, size=(3, f)).astype(np.float32)
    out_b = rng.normal(0.0, 0.002, size=3).astype(np.float32)

    # channels 0..2: identity carriers (slope 1 in color and in v)
    for c in range(3):
        enc_w[c, c] += 1.0
        hid_b[c] += 0.5
        out_w[c, c] += 1.0
        out_b[c] += -0.5

    # channel 3: pure-v unit kept linear over the working range; its
    # negative output weight lowers the net dv response of the carriers
    # from 1 to _TRANSLATION_GAIN
    if f > 3:
        comp = np.float32(1.0 - _TRANSLATION_GAIN)
        hid_b[3] += 3.0
        out_w[:, 3] += -comp
        out_b += comp * 3.0

    # remaining channels: ReLU kinks at varied color scales, strength
    # scales and kink positions. Mixing in the pure-v unit (channel 3)
    # through the hidden matrix decouples the strength coefficient from
    # the color coefficient, which a bare translation cannot do.
    luma = np.float32(1.0 / 3.0)
    masks = [
        np.array([1, 0, 0], np.float32),
        np.array([0, 1, 0], np.float32),
        np.array([0, 0, 1], np.float32),
        np.array([luma, luma, luma], np.float32),
    ]
    scales = [1.0, 2.0, 0.5, -1.0]
    gammas = [0.0, -0.5, 0.5]
    spread = np.linspace(-2.2, 2.2, max(f - 4, 1), dtype=np.float32)
    for j in range(4, f):
        i = j - 4
        mask = masks[i % len(masks)]
        scale = scales[(i // len(masks)) % len(scales)]
        gamma = gammas[(i // 16) % len(gammas)] if f > 3 else 0.0
        enc_w[j] += mask * np.float32(scale)
        if gamma != 0.0:
            # unit sees scale*p + (1+gamma)*v + const
            hid_w[j, 3] += gamma
        hid_b[j] += spread[i] * np.float32(1.0 + gamma) - np.float32(3.0 * gamma)
    return NeurOpParams(
        FcLayer(enc_w, enc_b), FcLayer(hid_w, hid_b), FcLayer(out_w, out_b)
    )


# ---------------------------------------------------------------------------
# forward paths


def encode(p, params: NeurOpParams):
    """RGB color(s) -> feature vector(s)."""
    return fc_forward(p, params.encoder)


def translate(z, v):
    """Shift feature vector(s) by v along the all-ones direction."""
    return z + np.asarray(v, dtype=z.dtype)


def decode(z, params: NeurOpParams):
    """Feature vector(s) -> RGB color(s)."""
    h = relu(fc_forward(z, params.decoder_hidden))
    return fc_forward(h, params.decoder_out)


def neurop_forward_image(img, v, params: NeurOpParams):
    """Apply the operator per pixel to an (H, W, 3) image; unclamped output.

    Bit-identical to evaluating each pixel on its own: the kernels are
    batch-independent per pixel and the palette shortcut only deduplicates
    identical colors.
    """
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) image, got shape {img.shape}")
    flat = np.ascontiguousarray(img.reshape(-1, 3), dtype=np.float32)
    palette, inverse = color_palette(flat)
    if palette is None:
        out = _apply_flat(flat, v, params)
    else:
        out = _apply_flat(palette, v, params)[inverse]
    return out.reshape(img.shape)


def neurop_forward(p, v, params: NeurOpParams):
    """Single-color forward; the 1x1-image special case of the image path."""
    p = np.asarray(p, dtype=np.float32)
    return neurop_forward_image(p.reshape(1, 1, 3), v, params).reshape(3)


def _apply_flat(flat, v, params: NeurOpParams):
    return kernels.neurop_apply(
        flat,
        params.encoder.weight, params.encoder.bias,
        params.decoder_hidden.weight, params.decoder_hidden.bias,
        params.decoder_out.weight, params.decoder_out.bias,
        np.float32(v),
    )


def color_palette(flat):
    """Distinct-color view of a flat (N, 3) array when it is quantized.

    Returns (palette, inverse) with palette rows taken verbatim from the
    array, or (None, None) when the image is not 8/16-bit quantized, is
    small enough that dedup is not worth it, or has too few repeats.
    """
    n = flat.shape[0]
    if n < _MEMOIZE_MIN_PIXELS:
        return None, None
    # tolerances cover float32 storage error of k/levels values
    for levels, tol, shift in ((255, 1e-3, 8), (65535, 5e-3, 16)):
        scaled = flat.astype(np.float64) * levels
        q = np.rint(scaled)
        if not np.all(np.abs(scaled - q) < tol):
            continue
        qi = q.astype(np.int64)
        keys = (qi[:, 0] << (2 * shift)) | (qi[:, 1] << shift) | qi[:, 2]
        _, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
        if first.size > 0.85 * n:
            return None, None
        return flat[first], inverse
    return None, None


# ---------------------------------------------------------------------------
# training path (materialized activations, GEMM-based)


def neurop_train_forward(flat, v, params: NeurOpParams):
    """Forward over a flat (N, 3) pixel block, caching activations."""
    z = fc_forward(flat, params.encoder) + np.asarray(v, dtype=flat.dtype)
    pre = fc_forward(z, params.decoder_hidden)
    h = relu(pre)
    out = fc_forward(h, params.decoder_out)
    return out, (flat, z, pre, h)


def neurop_train_backward(params: NeurOpParams, cache, grad_out):
    """Gradients w.r.t. input pixels, all parameters, and the strength."""
    flat, z, pre, h = cache
    gh, gw_out, gb_out = fc_backward(h, params.decoder_out, grad_out)
    gpre = relu_backward(pre, gh)
    gz, gw_hid, gb_hid = fc_backward(z, params.decoder_hidden, gpre)
    grad_v = float(gz.sum())
    gflat, gw_enc, gb_enc = fc_backward(flat, params.encoder, gz)
    grads = [gw_enc, gb_enc, gw_hid, gb_hid, gw_out, gb_out]
    return gflat, grads, grad_v


# ---------------------------------------------------------------------------
# analytic surrogate operators


class StandardOp(enum.Enum):
    BLACK_CLIPPING = "black-clipping"
    EXPOSURE = "exposure"
    VIBRANCE = "vibrance"


# initialization order for a K=3 operator chain
STANDARD_OP_ORDER = (StandardOp.BLACK_CLIPPING, StandardOp.EXPOSURE, StandardOp.VIBRANCE)

_EXPOSURE_SCALE = 1.5
_BLACK_SCALE = 0.25


def standard_op_apply(kind: StandardOp, img, v):
    """Analytic retouching operator on an image in [0, 1]; output clamped.

    All kinds are exactly the identity at v=0.
    """
    img = np.asarray(img, dtype=np.float32)
    v = float(v)
    if kind == StandardOp.EXPOSURE:
        out = img * np.float32(2.0 ** (_EXPOSURE_SCALE * v))
    elif kind == StandardOp.BLACK_CLIPPING:
        b = np.float32(_BLACK_SCALE * v)
        out = (img - b) / np.float32(1.0 - b)
    elif kind == StandardOp.VIBRANCE:
        m = img.max(axis=-1, keepdims=True)
        sat = m - img.min(axis=-1, keepdims=True)
        out = m - (m - img) * (1.0 + np.float32(v) * (1.0 - sat))
    else:
        raise ValueError(f"unknown standard operator {kind!r}")
    return np.clip(out, 0.0, 1.0).astype(np.float32)
