"""Fidelity metrics: PSNR, SSIM, mean CIE76 color difference.

All metrics compute in float64 regardless of input dtype. SSIM constants
are fixed (K1=0.01, K2=0.03, 11x11 Gaussian window with sigma 1.5, unit
dynamic range) so scores are comparable across runs of this package.
"""

from __future__ import annotations

import numpy as np

PSNR_CAP_DB = 100.0

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03

# sRGB <-> XYZ (D65)
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)
_WHITE_D65 = np.array([0.95047, 1.0, 1.08883])


def _check(a, b):
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")


def psnr(a, b) -> float:
    """10 log10(1/MSE) for [0,1] images; identical images cap at 100 dB."""
    _check(a, b)
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(float(10.0 * np.log10(1.0 / mse)), PSNR_CAP_DB)


def _gaussian_window(n, sigma):
    r = np.arange(n, dtype=np.float64) - (n - 1) / 2.0
    g = np.exp(-(r * r) / (2.0 * sigma * sigma))
    g /= g.sum()
    return np.outer(g, g)


def _to_gray(img):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3:
        return img.mean(axis=2)
    return img


def ssim(a, b) -> float:
    """Mean structural similarity over Gaussian-weighted local windows.

    Images smaller than the window fall back to one global window with
    uniform weights.
    """
    _check(a, b)
    x = _to_gray(a)
    y = _to_gray(b)
    c1 = _SSIM_K1**2
    c2 = _SSIM_K2**2
    h, w = x.shape
    if h < _SSIM_WINDOW or w < _SSIM_WINDOW:
        mx, my = x.mean(), y.mean()
        vx, vy = x.var(), y.var()
        cov = ((x - mx) * (y - my)).mean()
        return float(
            ((2 * mx * my + c1) * (2 * cov + c2))
            / ((mx * mx + my * my + c1) * (vx + vy + c2))
        )
    win = _gaussian_window(_SSIM_WINDOW, _SSIM_SIGMA)

    def filt(img):
        view = np.lib.stride_tricks.sliding_window_view(
            img, (_SSIM_WINDOW, _SSIM_WINDOW)
        )
        return np.einsum("ijkl,kl->ij", view, win)

    mx = filt(x)
    my = filt(y)
    mxx = filt(x * x)
    myy = filt(y * y)
    mxy = filt(x * y)
    vx = mxx - mx * mx
    vy = myy - my * my
    cov = mxy - mx * my
    num = (2 * mx * my + c1) * (2 * cov + c2)
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    return float((num / den).mean())


# ---------------------------------------------------------------------------
# CIE Lab


def srgb_to_lab(img):
    """sRGB in [0,1] (..., 3) -> CIE Lab (D65 white point)."""
    rgb = np.asarray(img, dtype=np.float64)
    linear = np.where(
        rgb <= 0.04045, rgb / 12.92, ((rgb + 0.055) / 1.055) ** 2.4
    )
    xyz = linear @ _RGB_TO_XYZ.T
    t = xyz / _WHITE_D65
    delta = 6.0 / 29.0
    f = np.where(t > delta**3, np.cbrt(t), t / (3 * delta * delta) + 4.0 / 29.0)
    fx, fy, fz = f[..., 0], f[..., 1], f[..., 2]
    lab = np.stack(
        [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)], axis=-1
    )
    return lab


def lab_to_srgb(lab):
    """Inverse of srgb_to_lab."""
    lab = np.asarray(lab, dtype=np.float64)
    l, a, b = lab[..., 0], lab[..., 1], lab[..., 2]
    fy = (l + 16.0) / 116.0
    fx = fy + a / 500.0
    fz = fy - b / 200.0
    delta = 6.0 / 29.0

    def finv(t):
        return np.where(t > delta, t**3, 3 * delta * delta * (t - 4.0 / 29.0))

    xyz = np.stack([finv(fx), finv(fy), finv(fz)], axis=-1) * _WHITE_D65
    linear = xyz @ _XYZ_TO_RGB.T
    rgb = np.where(
        linear <= 0.0031308,
        12.92 * linear,
        1.055 * np.maximum(linear, 0.0) ** (1.0 / 2.4) - 0.055,
    )
    return rgb


def delta_e(a, b) -> float:
    """Mean CIE76 color difference between two sRGB images."""
    _check(a, b)
    la = srgb_to_lab(a)
    lb = srgb_to_lab(b)
    return float(np.sqrt(((la - lb) ** 2).sum(axis=-1)).mean())
