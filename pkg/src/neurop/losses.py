"""Training losses: weighted L1, total-variation, color-angle.

Forwards and hand-derived backwards live side by side; everything is
dtype-generic so the float64 shadow gradient checks run through the same
code as float32 training.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_EPS_COLOR = 1e-6


@dataclass
class LossWeights:
    lambda_tv: float = 0.1
    lambda_color: float = 0.1
    enabled: tuple = ("r", "tv", "c")

    def __post_init__(self):
        if self.lambda_tv < 0 or self.lambda_color < 0:
            raise ValueError("loss weights must be >= 0")
        unknown = set(self.enabled) - {"r", "tv", "c"}
        if unknown:
            raise ValueError(f"unknown loss terms {sorted(unknown)}")


def _check_same_shape(a, b):
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")


def _weight_map(img, mask, hrp_weight):
    if mask is None:
        return None
    if mask.shape != img.shape[:2]:
        raise ValueError(f"mask shape {mask.shape} != image {img.shape[:2]}")
    return np.where(mask > 0.5, hrp_weight, 1.0).astype(img.dtype)


def loss_reconstruction(out, gt, mask=None, hrp_weight=5.0):
    """Mean absolute difference; with a mask, pixels inside weigh more.

    Masked form: sum(w * |out - gt|) / (sum(w) * C) with w in
    {hrp_weight, 1} per pixel.
    """
    _check_same_shape(out, gt)
    diff = np.abs(out - gt)
    w = _weight_map(out, mask, hrp_weight)
    if w is None:
        return float(diff.mean())
    num = float((diff * w[:, :, None]).sum())
    den = float(w.sum()) * out.shape[2]
    return num / den


def loss_reconstruction_backward(out, gt, mask=None, hrp_weight=5.0):
    """d loss_reconstruction / d out; sign(0) treated as 0."""
    sign = np.sign(out - gt)
    w = _weight_map(out, mask, hrp_weight)
    if w is None:
        return sign / out.size
    den = float(w.sum()) * out.shape[2]
    return sign * w[:, :, None] / den


def _forward_diffs(img):
    dx = np.zeros_like(img)
    dy = np.zeros_like(img)
    dx[:, :-1, :] = img[:, 1:, :] - img[:, :-1, :]
    dy[:-1, :, :] = img[1:, :, :] - img[:-1, :, :]
    return dx, dy


def loss_tv(out):
    """Euclidean norm of forward differences, divided by C*H*W.

    The last row/column difference is defined as zero, so 1xN and Nx1
    images simply lose one direction.
    """
    if out.ndim != 3:
        raise ValueError(f"expected (H, W, C), got {out.shape}")
    dx, dy = _forward_diffs(out)
    norm = np.sqrt(np.sum(dx * dx) + np.sum(dy * dy))
    return float(norm) / out.size


def loss_tv_backward(out):
    """d loss_tv / d out; zero at perfectly constant images."""
    dx, dy = _forward_diffs(out)
    norm = np.sqrt(np.sum(dx * dx) + np.sum(dy * dy))
    if norm < 1e-12:
        return np.zeros_like(out)
    g = np.zeros_like(out)
    # transpose of the forward-difference stencils
    g[:, 1:, :] += dx[:, :-1, :]
    g[:, :-1, :] -= dx[:, :-1, :]
    g[1:, :, :] += dy[:-1, :, :]
    g[:-1, :, :] -= dy[:-1, :, :]
    return g / (norm * out.size)


def loss_color(out, gt):
    """One minus the mean cosine between RGB vectors, per pixel.

    Pixels where both vectors are (near) zero count as perfectly aligned.
    """
    _check_same_shape(out, gt)
    na = np.linalg.norm(out, axis=2)
    nb = np.linalg.norm(gt, axis=2)
    dot = np.sum(out * gt, axis=2)
    cos = dot / (np.maximum(na, _EPS_COLOR) * np.maximum(nb, _EPS_COLOR))
    both_zero = (na < _EPS_COLOR) & (nb < _EPS_COLOR)
    cos = np.where(both_zero, 1.0, cos)
    return float(1.0 - cos.mean())


def loss_color_backward(out, gt):
    """d loss_color / d out."""
    na = np.linalg.norm(out, axis=2)
    nb = np.linalg.norm(gt, axis=2)
    sa = np.maximum(na, _EPS_COLOR)
    sb = np.maximum(nb, _EPS_COLOR)
    dot = np.sum(out * gt, axis=2)
    # d cos / d out; the norm clamp freezes at the eps floor
    term1 = gt / (sa * sb)[:, :, None]
    live = (na >= _EPS_COLOR)[:, :, None]
    term2 = np.where(live, dot[:, :, None] * out / (sa**3 * sb)[:, :, None], 0.0)
    dcos = term1 - term2
    both_zero = ((na < _EPS_COLOR) & (nb < _EPS_COLOR))[:, :, None]
    dcos = np.where(both_zero, 0.0, dcos)
    hw = out.shape[0] * out.shape[1]
    return -dcos / hw


def loss_total(out, gt, weights: LossWeights, mask=None, hrp_weight=5.0):
    """Weighted sum of the enabled terms."""
    total = 0.0
    if "r" in weights.enabled:
        total += loss_reconstruction(out, gt, mask, hrp_weight)
    if "tv" in weights.enabled:
        total += weights.lambda_tv * loss_tv(out)
    if "c" in weights.enabled:
        total += weights.lambda_color * loss_color(out, gt)
    return total


def loss_total_backward(out, gt, weights: LossWeights, mask=None, hrp_weight=5.0):
    """d loss_total / d out."""
    g = np.zeros_like(out)
    if "r" in weights.enabled:
        g += loss_reconstruction_backward(out, gt, mask, hrp_weight)
    if "tv" in weights.enabled:
        g += weights.lambda_tv * loss_tv_backward(out)
    if "c" in weights.enabled:
        g += weights.lambda_color * loss_color_backward(out, gt)
    return g
