"""Numba-jitted kernel implementations.

The color-operator MLP processes pixels in fixed lanes of `_LANES`; every
lane runs the same instruction sequence, so per-pixel results do not
depend on batch size. fastmath only reassociates within a lane-local
expression and keeps that guarantee.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_LANES = 64


@njit(cache=True, fastmath=True)
def _neurop_lanes(colors, enc_w, enc_bv, hid_w, hid_b, out_w, out_b, out):
    n = colors.shape[0]
    f = enc_w.shape[0]
    z = np.zeros((f, _LANES), dtype=np.float32)
    h = np.zeros((f, _LANES), dtype=np.float32)
    p0 = np.zeros(_LANES, dtype=np.float32)
    p1 = np.zeros(_LANES, dtype=np.float32)
    p2 = np.zeros(_LANES, dtype=np.float32)
    for s in range(0, n, _LANES):
        t = min(_LANES, n - s)
        for l in range(t):
            p0[l] = colors[s + l, 0]
            p1[l] = colors[s + l, 1]
            p2[l] = colors[s + l, 2]
        for j in range(f):
            w0 = enc_w[j, 0]
            w1 = enc_w[j, 1]
            w2 = enc_w[j, 2]
            bb = enc_bv[j]
            for l in range(_LANES):
                z[j, l] = w0 * p0[l] + w1 * p1[l] + w2 * p2[l] + bb
        for j in range(f):
            for l in range(_LANES):
                h[j, l] = hid_b[j]
        for k in range(f):
            for j in range(f):
                w = hid_w[j, k]
                for l in range(_LANES):
                    h[j, l] += w * z[k, l]
        for j in range(f):
            for l in range(_LANES):
                if h[j, l] < 0.0:
                    h[j, l] = 0.0
        for c in range(3):
            for l in range(t):
                acc = out_b[c]
                for k in range(f):
                    acc += out_w[c, k] * h[k, l]
                out[s + l, c] = acc
    return out


def neurop_apply(colors, enc_w, enc_b, hid_w, hid_b, out_w, out_b, v):
    """Fused color-operator MLP over a flat pixel array.

    colors: (N, 3) float32. Returns (N, 3) float32, unclamped.
    """
    out = np.empty((colors.shape[0], 3), dtype=np.float32)
    enc_bv = (enc_b + np.float32(v)).astype(np.float32)
    return _neurop_lanes(
        np.ascontiguousarray(colors), enc_w, enc_bv, hid_w, hid_b, out_w, out_b, out
    )


@njit(cache=True)
def _conv2d(x, weight, bias, stride, padding, out):
    o, c, k, _ = weight.shape
    oh, ow = out.shape[1], out.shape[2]
    ih, iw = x.shape[1], x.shape[2]
    for oc in range(o):
        for oy in range(oh):
            for ox in range(ow):
                acc = bias[oc]
                y0 = oy * stride - padding
                x0 = ox * stride - padding
                for ic in range(c):
                    for ky in range(k):
                        yy = y0 + ky
                        if yy < 0 or yy >= ih:
                            continue
                        for kx in range(k):
                            xx = x0 + kx
                            if xx < 0 or xx >= iw:
                                continue
                            acc += weight[oc, ic, ky, kx] * x[ic, yy, xx]
                out[oc, oy, ox] = acc
    return out


def conv2d_forward(x, weight, bias, stride, padding):
    """Cross-correlation plus bias. x: (C, H, W), weight: (O, C, k, k)."""
    o, _, k, _ = weight.shape
    oh = (x.shape[1] + 2 * padding - k) // stride + 1
    ow = (x.shape[2] + 2 * padding - k) // stride + 1
    out = np.empty((o, oh, ow), dtype=np.float32)
    return _conv2d(np.ascontiguousarray(x), weight, bias, stride, padding, out)


@njit(cache=True)
def _axis_coords(n_out, n_in):
    scale = n_in / n_out
    lo = np.empty(n_out, dtype=np.int64)
    hi = np.empty(n_out, dtype=np.int64)
    w = np.empty(n_out, dtype=np.float32)
    for i in range(n_out):
        src = (i + 0.5) * scale - 0.5
        if src < 0.0:
            src = 0.0
        if src > n_in - 1:
            src = n_in - 1
        l = int(np.floor(src))
        lo[i] = l
        hi[i] = min(l + 1, n_in - 1)
        w[i] = np.float32(src - l)
    return lo, hi, w


@njit(cache=True)
def _resize(img, out):
    in_h, in_w, c = img.shape
    out_h, out_w = out.shape[0], out.shape[1]
    y0, y1, wy = _axis_coords(out_h, in_h)
    x0, x1, wx = _axis_coords(out_w, in_w)
    for i in range(out_h):
        fy = wy[i]
        for j in range(out_w):
            fx = wx[j]
            for ch in range(c):
                top = img[y0[i], x0[j], ch] * (1.0 - fx) + img[y0[i], x1[j], ch] * fx
                bot = img[y1[i], x0[j], ch] * (1.0 - fx) + img[y1[i], x1[j], ch] * fx
                out[i, j, ch] = top * (1.0 - fy) + bot * fy
    return out


def resize_bilinear(img, out_h, out_w):
    """Bilinear resample of an (H, W, C) float32 image."""
    out = np.empty((out_h, out_w, img.shape[2]), dtype=np.float32)
    return _resize(np.ascontiguousarray(img), out)


@njit(cache=True)
def _resize_backward(grad_out, grad_in):
    out_h, out_w, c = grad_out.shape
    in_h, in_w = grad_in.shape[0], grad_in.shape[1]
    y0, y1, wy = _axis_coords(out_h, in_h)
    x0, x1, wx = _axis_coords(out_w, in_w)
    for i in range(out_h):
        fy = wy[i]
        for j in range(out_w):
            fx = wx[j]
            for ch in range(c):
                g = grad_out[i, j, ch]
                grad_in[y0[i], x0[j], ch] += g * (1.0 - fy) * (1.0 - fx)
                grad_in[y0[i], x1[j], ch] += g * (1.0 - fy) * fx
                grad_in[y1[i], x0[j], ch] += g * fy * (1.0 - fx)
                grad_in[y1[i], x1[j], ch] += g * fy * fx
    return grad_in


def resize_bilinear_backward(grad_out, in_h, in_w):
    """Transpose of `resize_bilinear`: scatter output grads to input pixels."""
    grad_in = np.zeros((in_h, in_w, grad_out.shape[2]), dtype=np.float32)
    return _resize_backward(np.ascontiguousarray(grad_out), grad_in)
