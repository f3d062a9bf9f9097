"""Dense-tensor layer math: forwards, hand-derived backwards, Adam.

Everything operates on plain numpy arrays. Parameters live in float32;
the functions themselves are dtype-generic so gradient checks can run a
float64 shadow copy of a layer through the same code.

Conventions fixed here and relied on by the gradient checks:

* ReLU derivative at exactly 0 is 0.
* stats_pool max-branch ties break on the first occurrence in row-major
  order; its std branch is the population standard deviation and has zero
  gradient at zero variance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from neurop import kernels


@dataclass
class FcLayer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]

    @classmethod
    def create(cls, rng, in_dim, out_dim, scale=None) -> "FcLayer":
        if scale is None:
            scale = float(np.sqrt(1.0 / in_dim))
        w = rng.uniform(-scale, scale, size=(out_dim, in_dim)).astype(np.float32)
        b = np.zeros(out_dim, dtype=np.float32)
        return cls(w, b)


@dataclass
class ConvLayer:
    weight: np.ndarray  # (out_c, in_c, k, k)
    bias: np.ndarray  # (out_c,)
    stride: int = 1
    padding: int = 0

    @property
    def kernel_size(self) -> int:
        return self.weight.shape[2]

    @classmethod
    def create(cls, rng, in_c, out_c, k, stride=1, padding=0) -> "ConvLayer":
        fan_in = in_c * k * k
        scale = float(np.sqrt(1.0 / fan_in))
        w = rng.uniform(-scale, scale, size=(out_c, in_c, k, k)).astype(np.float32)
        b = np.zeros(out_c, dtype=np.float32)
        return cls(w, b, stride=stride, padding=padding)


def conv_output_size(n, k, stride, padding) -> int:
    return (n + 2 * padding - k) // stride + 1


# ---------------------------------------------------------------------------
# fully connected


def fc_forward(x, layer: FcLayer):
    """y = W x + b. x may be (in,) or batched (N, in)."""
    if x.shape[-1] != layer.in_dim:
        raise ValueError(
            f"fc input width {x.shape[-1]} != layer input width {layer.in_dim}"
        )
    return x @ layer.weight.T + layer.bias


def fc_backward(x, layer: FcLayer, grad_y):
    """Gradients of a scalar loss w.r.t. input, weight and bias."""
    if x.ndim == 1:
        grad_w = np.outer(grad_y, x)
        grad_b = grad_y.copy()
    else:
        grad_w = grad_y.T @ x
        grad_b = grad_y.sum(axis=0)
    grad_x = grad_y @ layer.weight
    return grad_x, grad_w, grad_b


# ---------------------------------------------------------------------------
# convolution (single image, CHW)


def _check_conv_shapes(x, layer: ConvLayer):
    k = layer.kernel_size
    if x.ndim != 3 or x.shape[0] != layer.weight.shape[1]:
        raise ValueError(
            f"conv input must be ({layer.weight.shape[1]}, H, W), got {x.shape}"
        )
    oh = conv_output_size(x.shape[1], k, layer.stride, layer.padding)
    ow = conv_output_size(x.shape[2], k, layer.stride, layer.padding)
    if oh < 1 or ow < 1:
        raise ValueError(
            f"kernel {k}x{k} larger than padded input {x.shape[1]}x{x.shape[2]} "
            f"(pad {layer.padding})"
        )
    return oh, ow


def conv2d_forward(x, layer: ConvLayer):
    """Inference path, routed through the active kernel backend."""
    _check_conv_shapes(x, layer)
    return kernels.conv2d_forward(
        x.astype(np.float32, copy=False), layer.weight, layer.bias,
        layer.stride, layer.padding,
    )


def _im2col(x, k, stride, padding):
    c = x.shape[0]
    if padding > 0:
        x = np.pad(x, ((0, 0), (padding, padding), (padding, padding)))
    win = np.lib.stride_tricks.sliding_window_view(x, (k, k), axis=(1, 2))
    win = win[:, ::stride, ::stride]
    oh, ow = win.shape[1], win.shape[2]
    cols = win.transpose(1, 2, 0, 3, 4).reshape(oh * ow, c * k * k)
    return np.ascontiguousarray(cols), oh, ow


def conv2d_forward_train(x, layer: ConvLayer):
    """Forward pass that keeps the im2col matrix for the backward pass."""
    oh, ow = _check_conv_shapes(x, layer)
    k = layer.kernel_size
    cols, _, _ = _im2col(x, k, layer.stride, layer.padding)
    o = layer.weight.shape[0]
    y = cols @ layer.weight.reshape(o, -1).T + layer.bias
    cache = (cols, x.shape, oh, ow)
    return np.ascontiguousarray(y.T.reshape(o, oh, ow)), cache


def conv2d_backward(layer: ConvLayer, cache, grad_y):
    """Backward of conv2d_forward_train; returns (grad_x, grad_w, grad_b)."""
    cols, x_shape, oh, ow = cache
    o = layer.weight.shape[0]
    k = layer.kernel_size
    c = x_shape[0]
    gy = grad_y.reshape(o, oh * ow)
    grad_b = gy.sum(axis=1)
    grad_w = (gy @ cols).reshape(layer.weight.shape)
    # scatter column grads back onto the padded input (col2im)
    gcols = gy.T @ layer.weight.reshape(o, -1)  # (oh*ow, c*k*k)
    p = layer.padding
    ph, pw = x_shape[1] + 2 * p, x_shape[2] + 2 * p
    grad_xp = np.zeros((c, ph, pw), dtype=gcols.dtype)
    gcols = gcols.reshape(oh, ow, c, k, k)
    s = layer.stride
    for ky in range(k):
        for kx in range(k):
            grad_xp[:, ky : ky + s * oh : s, kx : kx + s * ow : s] += (
                gcols[:, :, :, ky, kx].transpose(2, 0, 1)
            )
    if p > 0:
        grad_xp = grad_xp[:, p:-p, p:-p]
    return grad_xp, grad_w, grad_b


# ---------------------------------------------------------------------------
# activations


def relu(x):
    return np.maximum(x, 0.0)


def relu_backward(x, grad_y):
    return np.where(x > 0, grad_y, 0.0)


def tanh(x):
    return np.tanh(x)


def tanh_backward(y, grad_y):
    """Backward given the forward output y = tanh(x)."""
    return grad_y * (1.0 - y * y)


# ---------------------------------------------------------------------------
# global statistics pooling


def stats_pool(f):
    """Per-channel [max | mean | population std] of a (C, H, W) map -> (3C,)."""
    if f.ndim != 3 or f.shape[1] * f.shape[2] < 1:
        raise ValueError(f"stats_pool needs a (C, H, W) map, got shape {f.shape}")
    flat = f.reshape(f.shape[0], -1)
    mx = flat.max(axis=1)
    mu = flat.mean(axis=1)
    sd = np.sqrt(((flat - mu[:, None]) ** 2).mean(axis=1))
    return np.concatenate([mx, mu, sd])


def stats_pool_backward(f, grad_out):
    """Backward of stats_pool. Max ties route to the first row-major index."""
    c = f.shape[0]
    hw = f.shape[1] * f.shape[2]
    flat = f.reshape(c, hw)
    g_max, g_mu, g_sd = grad_out[:c], grad_out[c : 2 * c], grad_out[2 * c :]
    grad = np.zeros_like(flat)
    grad[np.arange(c), flat.argmax(axis=1)] = g_max
    grad += (g_mu / hw)[:, None]
    mu = flat.mean(axis=1)
    centered = flat - mu[:, None]
    var = (centered**2).mean(axis=1)
    safe_sd = np.sqrt(np.maximum(var, 1e-12))
    grad += (g_sd / (hw * safe_sd))[:, None] * centered
    return grad.reshape(f.shape)


# ---------------------------------------------------------------------------
# Adam


@dataclass
class Adam:
    """Adam with bias correction; moments are created on first step."""

    lr: float = 5e-5
    beta1: float = 0.9
    beta2: float = 0.99
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def step(self, params, grads):
        """Update params in place from matching grads."""
        if len(params) != len(grads):
            raise ValueError("params/grads length mismatch")
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for i, (p, g) in enumerate(zip(params, grads)):
            if p.shape != g.shape:
                raise ValueError(f"param {i}: shape {p.shape} != grad {g.shape}")
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * (g * g)
            m_hat = self.m[i] / bc1
            v_hat = self.v[i] / bc2
            p -= (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.dtype)

    def state_arrays(self):
        """Moment arrays for checkpointing, in parameter order."""
        return list(self.m) + list(self.v)


# ---------------------------------------------------------------------------
# finite differences


def finite_diff_check(f, params, analytic_grads, eps=1e-5):
    """Compare analytic gradients of scalar f(params) to central differences.

    params is a list of float64 arrays perturbed in place; returns the max
    over all entries of |analytic - numeric| / max(|analytic|, |numeric|,
    1e-8). Raises if f evaluates non-finite, naming the offending index.
    """
    worst = 0.0
    for i, (p, g) in enumerate(zip(params, analytic_grads)):
        flat_p = p.reshape(-1)
        flat_g = np.asarray(g, dtype=np.float64).reshape(-1)
        for j in range(flat_p.size):
            orig = flat_p[j]
            flat_p[j] = orig + eps
            up = float(f())
            flat_p[j] = orig - eps
            down = float(f())
            flat_p[j] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise FloatingPointError(
                    f"non-finite evaluation while perturbing param {i} entry {j}"
                )
            numeric = (up - down) / (2.0 * eps)
            analytic = flat_g[j]
            denom = max(abs(analytic), abs(numeric), 1e-8)
            worst = max(worst, abs(analytic - numeric) / denom)
    return worst
