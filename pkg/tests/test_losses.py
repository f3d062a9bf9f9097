"""Loss terms against double-precision brute-force oracles."""

import numpy as np
import pytest

from neurop.losses import (
    LossWeights,
    loss_color,
    loss_color_backward,
    loss_reconstruction,
    loss_reconstruction_backward,
    loss_total,
    loss_total_backward,
    loss_tv,
    loss_tv_backward,
)
from neurop.nn import finite_diff_check


def oracle_l1(out, gt, mask=None, hrp=5.0):
    """Straight-line double-precision re-implementation."""
    out = out.astype(np.float64)
    gt = gt.astype(np.float64)
    num = 0.0
    den = 0.0
    h, w, c = out.shape
    for i in range(h):
        for j in range(w):
            wgt = hrp if (mask is not None and mask[i, j] > 0.5) else 1.0
            for k in range(c):
                num += wgt * abs(out[i, j, k] - gt[i, j, k])
            den += wgt * c if mask is not None else c
    return num / den


def oracle_tv(out):
    out = out.astype(np.float64)
    h, w, c = out.shape
    acc = 0.0
    for i in range(h):
        for j in range(w):
            for k in range(c):
                if j + 1 < w:
                    acc += (out[i, j + 1, k] - out[i, j, k]) ** 2
                if i + 1 < h:
                    acc += (out[i + 1, j, k] - out[i, j, k]) ** 2
    return np.sqrt(acc) / (h * w * c)


def oracle_color(out, gt, eps=1e-6):
    out = out.astype(np.float64)
    gt = gt.astype(np.float64)
    h, w, _ = out.shape
    acc = 0.0
    for i in range(h):
        for j in range(w):
            a, b = out[i, j], gt[i, j]
            na, nb = np.linalg.norm(a), np.linalg.norm(b)
            if na < eps and nb < eps:
                acc += 1.0
            else:
                acc += (a @ b) / (max(na, eps) * max(nb, eps))
    return 1.0 - acc / (h * w)


class TestReconstruction:
    def test_identical_images_zero(self, rng):
        img = rng.random((5, 4, 3), dtype=np.float32)
        assert loss_reconstruction(img, img) == 0.0

    def test_uniform_difference(self):
        a = np.zeros((4, 4, 3), np.float32)
        b = np.full((4, 4, 3), 0.1, np.float32)
        np.testing.assert_allclose(loss_reconstruction(a, b), 0.1, rtol=1e-6)

    def test_half_masked_weighted_mean(self):
        # w=5 on half the pixels with diff 0.1, 0 elsewhere:
        # 0.5*5*0.1 / (0.5*5 + 0.5) = 0.08333...
        h, w = 4, 4
        out = np.zeros((h, w, 3), np.float32)
        gt = np.zeros((h, w, 3), np.float32)
        mask = np.zeros((h, w), np.float32)
        mask[:2] = 1.0
        out[:2] = 0.1
        got = loss_reconstruction(out, gt, mask, hrp_weight=5.0)
        np.testing.assert_allclose(got, 0.5 * 5 * 0.1 / (0.5 * 5 + 0.5), rtol=1e-6)

    def test_shape_mismatch_raises(self):
        with pytest.raises(ValueError):
            loss_reconstruction(np.zeros((2, 2, 3)), np.zeros((2, 3, 3)))

    @pytest.mark.parametrize("use_mask", [False, True])
    def test_matches_bruteforce(self, rng, use_mask):
        for _ in range(20):
            out = rng.random((16, 16, 3), dtype=np.float32)
            gt = rng.random((16, 16, 3), dtype=np.float32)
            mask = (rng.random((16, 16)) > 0.5).astype(np.float32) if use_mask else None
            got = loss_reconstruction(out, gt, mask)
            np.testing.assert_allclose(got, oracle_l1(out, gt, mask), rtol=1e-5)


class TestTv:
    def test_constant_image_zero(self):
        assert loss_tv(np.full((6, 6, 3), 0.7, np.float32)) == 0.0

    def test_two_pixel_hand_case(self):
        # single channel 1x2 image [0, 1]: norm 1, /CHW=2 -> 0.5
        img = np.array([[[0.0], [1.0]]], np.float32)
        np.testing.assert_allclose(loss_tv(img), 0.5, rtol=1e-6)

    def test_contrast_doubling_scales_norm(self, rng):
        img = rng.random((8, 8, 3), dtype=np.float32)
        np.testing.assert_allclose(loss_tv(2.0 * img), 2.0 * loss_tv(img), rtol=1e-5)

    def test_degenerate_single_row(self, rng):
        img = rng.random((1, 9, 3), dtype=np.float32)
        assert np.isfinite(loss_tv(img))

    def test_matches_bruteforce(self, rng):
        for _ in range(20):
            out = rng.random((16, 16, 3), dtype=np.float32)
            np.testing.assert_allclose(loss_tv(out), oracle_tv(out), rtol=1e-5)


class TestColor:
    def test_identical_nonzero_zero_loss(self, rng):
        img = rng.random((5, 5, 3), dtype=np.float32) + 0.1
        assert loss_color(img, img) < 1e-6

    def test_orthogonal_vectors(self):
        a = np.zeros((3, 3, 3), np.float32)
        b = np.zeros((3, 3, 3), np.float32)
        a[:, :, 0] = 1.0
        b[:, :, 1] = 1.0
        np.testing.assert_allclose(loss_color(a, b), 1.0, atol=1e-6)

    def test_45_degree_case(self):
        # (1,1,0) vs (1,0,0): 1 - 1/sqrt(2)
        a = np.zeros((2, 2, 3), np.float32)
        b = np.zeros((2, 2, 3), np.float32)
        a[:, :, 0] = 1.0
        a[:, :, 1] = 1.0
        b[:, :, 0] = 1.0
        np.testing.assert_allclose(loss_color(a, b), 1.0 - 1.0 / np.sqrt(2), rtol=1e-6)

    def test_both_zero_pixels_count_as_aligned(self):
        assert loss_color(np.zeros((4, 4, 3)), np.zeros((4, 4, 3))) == 0.0

    def test_matches_bruteforce(self, rng):
        for _ in range(20):
            out = rng.random((16, 16, 3), dtype=np.float32)
            gt = rng.random((16, 16, 3), dtype=np.float32)
            np.testing.assert_allclose(
                loss_color(out, gt), oracle_color(out, gt), rtol=1e-4, atol=1e-7
            )


class TestTotal:
    def test_zero_when_all_terms_zero(self):
        img = np.full((4, 4, 3), 0.5, np.float32)
        assert loss_total(img, img, LossWeights()) == 0.0

    def test_weighted_sum_arithmetic(self, rng):
        out = rng.random((8, 8, 3), dtype=np.float32)
        gt = rng.random((8, 8, 3), dtype=np.float32)
        w = LossWeights(lambda_tv=0.1, lambda_color=0.1)
        expected = (
            loss_reconstruction(out, gt)
            + 0.1 * loss_tv(out)
            + 0.1 * loss_color(out, gt)
        )
        np.testing.assert_allclose(loss_total(out, gt, w), expected, rtol=1e-7)

    def test_single_term_subset(self, rng):
        out = rng.random((8, 8, 3), dtype=np.float32)
        gt = rng.random((8, 8, 3), dtype=np.float32)
        w = LossWeights(enabled=("r",))
        np.testing.assert_allclose(
            loss_total(out, gt, w), loss_reconstruction(out, gt), rtol=1e-7
        )

    def test_nonnegative_and_zero_implies_reconstruction_zero(self, rng):
        for _ in range(10):
            out = rng.random((6, 6, 3), dtype=np.float32)
            gt = rng.random((6, 6, 3), dtype=np.float32)
            total = loss_total(out, gt, LossWeights())
            assert total >= 0.0
            if total == 0.0:
                assert loss_reconstruction(out, gt) == 0.0

    def test_invalid_weights_raise(self):
        with pytest.raises(ValueError):
            LossWeights(lambda_tv=-0.1)
        with pytest.raises(ValueError):
            LossWeights(enabled=("r", "bogus"))


class TestLossGradients:
    """Backwards validated by central finite differences in float64."""

    @pytest.mark.parametrize("use_mask", [False, True])
    def test_reconstruction_grad(self, rng, use_mask):
        out = rng.random((5, 4, 3)) + 0.05
        gt = rng.random((5, 4, 3))
        mask = (rng.random((5, 4)) > 0.5).astype(np.float64) if use_mask else None

        def f():
            return loss_reconstruction(out, gt, mask)

        g = loss_reconstruction_backward(out, gt, mask)
        assert finite_diff_check(f, [out], [g], eps=1e-6) < 1e-3

    def test_tv_grad(self, rng):
        out = rng.random((5, 4, 3))

        def f():
            return loss_tv(out)

        g = loss_tv_backward(out)
        assert finite_diff_check(f, [out], [g], eps=1e-6) < 1e-4

    def test_color_grad(self, rng):
        out = rng.random((5, 4, 3)) + 0.1
        gt = rng.random((5, 4, 3)) + 0.1

        def f():
            return loss_color(out, gt)

        g = loss_color_backward(out, gt)
        assert finite_diff_check(f, [out], [g], eps=1e-6) < 1e-4

    def test_total_grad(self, rng):
        out = rng.random((5, 4, 3)) + 0.05
        gt = rng.random((5, 4, 3))
        w = LossWeights()

        def f():
            return loss_total(out, gt, w)

        g = loss_total_backward(out, gt, w)
        assert finite_diff_check(f, [out], [g], eps=1e-6) < 1e-3
