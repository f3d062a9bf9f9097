"""Acceptance criteria, one test per criterion at its stated tolerance.

Run with `pytest tests/test_acceptance.py -v -s` to see one pass/fail line
per criterion. The training-based criteria are marked slow; the full
suite runs everything.
"""

import time

import numpy as np
import pytest

from neurop.color import (
    NeurOpParams,
    StandardOp,
    decode,
    encode,
    neurop_forward,
    translate,
)
from neurop.config import make_config, new_model
from neurop.data import make_synthetic_dataset
from neurop.losses import LossWeights
from neurop.metrics import delta_e, lab_to_srgb, psnr, srgb_to_lab, ssim
from neurop.nn import (
    Adam,
    ConvLayer,
    FcLayer,
    conv2d_backward,
    conv2d_forward_train,
    fc_backward,
    fc_forward,
    finite_diff_check,
    relu,
    relu_backward,
    stats_pool,
    stats_pool_backward,
    tanh,
    tanh_backward,
)
from neurop.pipeline import model_summary, retouch, retouch_with_strengths
from neurop.training import (
    build_init_corpus,
    evaluate_model,
    init_losses,
    init_op_kinds,
    pipeline_forward_backward,
    train_init,
    train_joint,
)

SEED = 7


def report(name, detail):
    print(f"\n[PASS] {name}: {detail}")


# ---------------------------------------------------------------------------
# shared slow fixtures


@pytest.fixture(scope="session")
def init_corpus_images():
    return [p.input for p in make_synthetic_dataset(50, size=64, seed=11).pairs]


@pytest.fixture(scope="session")
def heldout_corpus_images():
    return [p.input for p in make_synthetic_dataset(10, size=64, seed=99).pairs]


@pytest.fixture(scope="session")
def initialized_ops(init_corpus_images):
    """Three operators imitation-trained at the pinned desk budget."""
    cfg = make_config("desk", seed=SEED)
    ops = []
    elapsed = {}
    for kind in init_op_kinds(3):
        t0 = time.time()
        op = NeurOpParams.create(np.random.default_rng(SEED), scheme="identity")
        corpus = build_init_corpus(init_corpus_images, kind, cfg.corpus_size)
        train_init(op, corpus, cfg)
        elapsed[kind] = time.time() - t0
        ops.append((kind, op))
    return ops, elapsed


# ---------------------------------------------------------------------------
# criterion 1: gradient correctness


class TestGradientCorrectness:
    def test_every_layer_and_tiny_model(self, rng):
        t0 = time.time()
        worst = 0.0

        for _ in range(100):  # fully connected
            n_in, n_out = int(rng.integers(1, 8)), int(rng.integers(1, 8))
            layer = FcLayer(
                rng.standard_normal((n_out, n_in)), rng.standard_normal(n_out)
            )
            x = rng.standard_normal(n_in)
            w = rng.standard_normal(n_out)
            gx, gw, gb = fc_backward(x, layer, w)
            worst = max(worst, finite_diff_check(
                lambda: float(fc_forward(x, layer) @ w),
                [x, layer.weight, layer.bias], [gx, gw, gb]))

        for _ in range(100):  # conv k7s2p1
            c, o = int(rng.integers(1, 3)), int(rng.integers(1, 3))
            h, w_ = int(rng.integers(7, 11)), int(rng.integers(7, 11))
            layer = ConvLayer(
                rng.standard_normal((o, c, 7, 7)) * 0.2,
                rng.standard_normal(o), stride=2, padding=1,
            )
            x = rng.standard_normal((c, h, w_))
            gout = rng.standard_normal(conv2d_forward_train(x, layer)[0].shape)
            _, cache = conv2d_forward_train(x, layer)
            gx, gw, gb = conv2d_backward(layer, cache, gout)
            worst = max(worst, finite_diff_check(
                lambda: float((conv2d_forward_train(x, layer)[0] * gout).sum()),
                [x, layer.weight, layer.bias], [gx, gw, gb]))

        for _ in range(100):  # relu
            x = rng.standard_normal(12) + 0.05  # keep off the kink
            gout = rng.standard_normal(12)
            g = relu_backward(x, gout)
            worst = max(worst, finite_diff_check(
                lambda: float(relu(x) @ gout), [x], [g]))

        for _ in range(100):  # stats pooling (max, mean, std branches)
            c = int(rng.integers(1, 4))
            h, w_ = int(rng.integers(2, 6)), int(rng.integers(2, 6))
            f = rng.standard_normal((c, h, w_))
            gout = rng.standard_normal(3 * c)
            g = stats_pool_backward(f, gout)
            worst = max(worst, finite_diff_check(
                lambda: float(stats_pool(f) @ gout), [f], [g]))

        for _ in range(100):  # tanh head
            x = rng.standard_normal(8)
            gout = rng.standard_normal(8)
            g = tanh_backward(tanh(x), gout)
            worst = max(worst, finite_diff_check(
                lambda: float(tanh(x) @ gout), [x], [g]))

        # end-to-end tiny model (F=4, C1=2, 8x8), incl. the downsampler
        cfg = make_config(
            "desk", num_ops=3, feature_dim=4, conv1_channels=2,
            conv2_channels=3, conv_kernel=3, downsample_target=6,
        )
        model = new_model(cfg, rng)
        for op in model.neurops:
            for l in (op.encoder, op.decoder_hidden, op.decoder_out):
                l.weight = l.weight.astype(np.float64)
                l.bias = l.bias.astype(np.float64)
        for c1, c2 in model.predictors.backbones:
            for l in (c1, c2):
                l.weight = l.weight.astype(np.float64)
                l.bias = l.bias.astype(np.float64)
        for head in model.predictors.heads:
            head.weight = head.weight.astype(np.float64)
            head.bias = head.bias.astype(np.float64)
        img = rng.random((8, 8, 3))
        target = rng.random((8, 8, 3))
        weights = LossWeights()
        _, grads, _ = pipeline_forward_backward(model, img, target, weights)
        worst = max(worst, finite_diff_check(
            lambda: pipeline_forward_backward(model, img, target, weights)[0],
            model.param_arrays(), grads))

        elapsed = time.time() - t0
        assert worst < 1e-3
        assert elapsed < 60
        report("gradient correctness",
               f"max rel err {worst:.2e} over 500 layer configs + tiny "
               f"end-to-end model in {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# criterion 2: initialization fidelity


@pytest.mark.slow
class TestInitializationFidelity:
    def test_desk_scale_imitation(self, initialized_ops, heldout_corpus_images):
        ops, elapsed = initialized_ops
        cfg = make_config("desk", seed=SEED)
        thresholds = {
            StandardOp.EXPOSURE: (0.02, 0.03),
            StandardOp.BLACK_CLIPPING: (0.03, 0.03),
            StandardOp.VIBRANCE: (0.03, 0.03),
        }
        details = []
        for kind, op in ops:
            held = build_init_corpus(heldout_corpus_images, kind, cfg.corpus_size)
            unary, pairwise = init_losses(op, held)
            thr_u, thr_p = thresholds[kind]
            assert unary < thr_u, f"{kind.value} unary {unary:.4f} >= {thr_u}"
            assert pairwise < thr_p, f"{kind.value} pairwise {pairwise:.4f} >= {thr_p}"
            details.append(f"{kind.value} u={unary:.4f} p={pairwise:.4f}")
        total = sum(elapsed.values())
        assert total < 600, f"init training took {total:.0f}s >= 10 min"
        report("initialization fidelity",
               "; ".join(details) + f"; training {total:.0f}s")


# ---------------------------------------------------------------------------
# criterion 3: approximate homomorphism


@pytest.mark.slow
class TestHomomorphism:
    def test_rgb_space_approximate(self, initialized_ops):
        ops, _ = initialized_ops
        op = dict(ops)[StandardOp.EXPOSURE]
        rng = np.random.default_rng(3)
        n = 10_000
        p = rng.random((n, 3), dtype=np.float32)
        v1 = rng.uniform(-0.5, 0.5, n).astype(np.float32)
        v2 = rng.uniform(-0.5, 0.5, n).astype(np.float32)
        errs = np.empty(n, dtype=np.float64)
        for i in range(n):
            once = decode(translate(encode(p[i], op), v1[i] + v2[i]), op)
            twice = decode(
                translate(encode(
                    decode(translate(encode(p[i], op), v1[i]), op), op
                ), v2[i]), op,
            )
            errs[i] = np.abs(once - twice).mean()
        mean_err = float(errs.mean())
        assert mean_err < 0.05
        report("approximate homomorphism (color space)",
               f"mean |R(R(p,v1),v2) - R(p,v1+v2)| = {mean_err:.4f} < 0.05")

    def test_feature_space_exact(self, rng):
        op = NeurOpParams.create(rng)
        z = encode(rng.random((100, 3), dtype=np.float32), op)
        v1, v2 = np.float32(0.37), np.float32(-0.21)
        # fixed summation order: the scalar sum is formed first
        s = np.float32(v1 + v2)
        np.testing.assert_array_equal(translate(z, s), translate(z, s))
        chained = translate(translate(z, v1), v2)
        np.testing.assert_allclose(chained, translate(z, s), atol=1e-6)
        report("exact homomorphism (feature space)",
               "translation additivity holds to float round-off")


# ---------------------------------------------------------------------------
# criterion 4: desk-scale end-to-end training


@pytest.mark.slow
class TestDeskTraining:
    def test_synthetic_heldout_quality(self, initialized_ops):
        ops, _ = initialized_ops
        cfg = make_config("desk", seed=SEED)
        model = new_model(cfg, np.random.default_rng(SEED))
        for k, (_, op) in enumerate(ops):
            model.neurops[k] = op.copy()

        train_ds = make_synthetic_dataset(50, size=128, seed=100)
        held_ds = make_synthetic_dataset(10, size=128, seed=200, split="test")
        t0 = time.time()
        history = train_joint(model, train_ds, cfg)
        elapsed = time.time() - t0

        # invariant: trailing-100-step mean decreases over the first 2k steps
        early = float(np.mean(history[100:200]))
        late = float(np.mean(history[1900:2000]))
        assert late < early, f"loss trend not decreasing: {early:.4f} -> {late:.4f}"

        stats = evaluate_model(model, held_ds)
        assert stats["psnr"] >= 30.0, f"held-out PSNR {stats['psnr']:.2f} < 30"
        assert stats["delta_e"] <= 3.0, f"held-out dE {stats['delta_e']:.2f} > 3"
        assert elapsed < 7200
        report("desk-scale end-to-end training",
               f"held-out PSNR {stats['psnr']:.2f} dB, dE {stats['delta_e']:.2f}, "
               f"{cfg.iterations} steps in {elapsed / 60:.0f} min")


# ---------------------------------------------------------------------------
# criterion 5: parameter budget


class TestParameterBudget:
    def test_default_model_totals(self):
        model = new_model(make_config("desk"), np.random.default_rng(0))
        summary = model_summary(model)
        assert summary["per_operator"] == [4611, 4611, 4611]
        assert 25_000 <= summary["total"] <= 32_000
        report("parameter budget",
               f"total {summary['total']} in [25000, 32000] "
               f"(reference compact design: 28,108); per-operator 4611 exact")


# ---------------------------------------------------------------------------
# criterion 6: loss oracles


class TestLossOracles:
    def test_bruteforce_and_analytic_cases(self, rng):
        from test_losses import oracle_color, oracle_l1, oracle_tv

        from neurop.losses import loss_color, loss_reconstruction, loss_tv

        worst = 0.0
        for _ in range(20):
            out = rng.random((16, 16, 3), dtype=np.float32)
            gt = rng.random((16, 16, 3), dtype=np.float32)
            worst = max(worst, abs(loss_reconstruction(out, gt) - oracle_l1(out, gt)))
            worst = max(worst, abs(loss_tv(out) - oracle_tv(out)))
            worst = max(worst, abs(loss_color(out, gt) - oracle_color(out, gt)))
        assert worst < 1e-5

        img = rng.random((6, 6, 3), dtype=np.float32)
        assert loss_reconstruction(img, img) == 0.0
        a = np.zeros((4, 4, 3), np.float32)
        b = np.full((4, 4, 3), 0.1, np.float32)
        np.testing.assert_allclose(loss_reconstruction(a, b), 0.1, rtol=1e-6)
        assert loss_tv(np.full((5, 5, 3), 0.3, np.float32)) == 0.0
        two_px = np.array([[[0.0], [1.0]]], np.float32)
        np.testing.assert_allclose(loss_tv(two_px), 0.5, rtol=1e-7)
        ortho_a = np.zeros((2, 2, 3), np.float32)
        ortho_b = np.zeros((2, 2, 3), np.float32)
        ortho_a[:, :, 0] = 1.0
        ortho_b[:, :, 1] = 1.0
        np.testing.assert_allclose(loss_color(ortho_a, ortho_b), 1.0, atol=1e-6)
        report("loss oracles",
               f"brute-force agreement within {worst:.2e} (tol 1e-5); "
               f"analytic cases exact")


# ---------------------------------------------------------------------------
# criterion 7: metric oracles


class TestMetricOracles:
    def test_psnr_delta_e_ssim_lab(self, rng):
        a = np.zeros((16, 16, 3))
        assert abs(psnr(a, np.full_like(a, 0.1)) - 20.0) < 1e-9
        assert abs(psnr(a, np.ones_like(a)) - 0.0) < 1e-9
        assert psnr(a, a) == 100.0

        de = delta_e(np.zeros((4, 4, 3)), np.ones((4, 4, 3)))
        assert abs(de - 100.0) < 0.1

        img = rng.random((32, 32, 3))
        assert ssim(img, img) == 1.0

        rgb = rng.random((256, 3))
        back = lab_to_srgb(srgb_to_lab(rgb))
        worst = float(np.abs(back - rgb).max())
        assert worst < 1e-4
        report("metric oracles",
               f"PSNR closed forms to 1e-9 dB; dE(black,white)={de:.3f}; "
               f"SSIM(identical)=1; Lab round-trip {worst:.1e}")


# ---------------------------------------------------------------------------
# criterion 8: determinism & replay


class TestDeterminismReplay:
    def test_seeded_runs_and_roundtrips(self, tmp_path, rng):
        from neurop.cli import main
        from neurop.data import imwrite
        from neurop.weights_io import load_weights, save_weights

        model = new_model(make_config("desk"), np.random.default_rng(SEED))
        wpath = tmp_path / "m.nop"
        save_weights(wpath, model)

        img = (rng.integers(0, 256, (96, 128, 3)) / 255.0).astype(np.float32)
        ipath = tmp_path / "in.png"
        imwrite(ipath, img)
        outs = []
        for name in ("a.png", "b.png"):
            out = tmp_path / name
            assert main(["infer", str(ipath), "--weights", str(wpath),
                         "--output", str(out), "--seed", str(SEED)]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

        result = retouch(img, model)
        replay = retouch_with_strengths(img, model, result.strengths)
        assert np.array_equal(result.output, replay)

        loaded, _, _ = load_weights(wpath)
        for x, y in zip(model.param_arrays(), loaded.param_arrays()):
            assert np.array_equal(x, y)
        report("determinism & replay",
               "seeded infer byte-identical; strength replay bit-exact; "
               "weight round-trip bit-exact")


# ---------------------------------------------------------------------------
# criterion 9: throughput


@pytest.mark.slow
class TestThroughput:
    def test_megapixel_latency(self):
        model = new_model(make_config("desk"), np.random.default_rng(SEED))
        # photo-like 1-megapixel image: smooth fields quantized to 8 bits
        base = make_synthetic_dataset(1, size=1024, seed=5).pairs[0].input
        img = base[:, :976]  # 1024x976 = 0.999 MP
        assert img.shape[0] * img.shape[1] >= 999_000

        strengths = [0.3, -0.2, 0.4]
        retouch_with_strengths(img, model, strengths)  # warm kernels
        t0 = time.perf_counter()
        retouch_with_strengths(img, model, strengths)
        bypass = time.perf_counter() - t0

        retouch(img, model)
        t0 = time.perf_counter()
        retouch(img, model)
        full = time.perf_counter() - t0

        assert bypass < 0.5, f"strength-replay path took {bypass * 1e3:.0f} ms"
        assert full < 0.8, f"full retouch took {full * 1e3:.0f} ms"
        report("throughput",
               f"1 MP: replay {bypass * 1e3:.0f} ms (< 500), "
               f"full retouch {full * 1e3:.0f} ms (< 800)")
