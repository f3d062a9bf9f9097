"""Two-stage training: operator initialization, then joint end-to-end.

Stage one teaches each color operator to imitate one analytic surrogate
operator from a corpus of strength-swept images: a unary term pins the
identity at strength zero, a pairwise term pins relative strengths
(strength differences span [-2, 2], so operators see inputs beyond the
predictor range during this stage).

Stage two backpropagates the full retouching loop - through every
operator, every predictor and the bilinear downsampler - with Adam on a
mini-batch of one augmented image per step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from neurop.color import (
    NeurOpParams,
    StandardOp,
    neurop_train_backward,
    neurop_train_forward,
    standard_op_apply,
)
from neurop.config import TrainConfig
from neurop.data import Dataset, ImagePair
from neurop.kernels import numpy_impl
from neurop.losses import LossWeights, loss_total, loss_total_backward
from neurop.metrics import delta_e, psnr, ssim
from neurop.nn import Adam
from neurop.pipeline import RetouchModel, clamp01, retouch
from neurop.predictor import predictor_train_backward, predictor_train_forward


# ---------------------------------------------------------------------------
# initialization corpora


@dataclass
class InitCorpus:
    kind: StandardOp
    strengths: np.ndarray  # (M,) uniform in [-1, 1], increasing
    sources: list  # source images, each (H, W, 3) in [0, 1]

    @property
    def num_levels(self) -> int:
        return len(self.strengths)

    def variant(self, i, m) -> np.ndarray:
        """Source image i retouched at strength level m."""
        return standard_op_apply(self.kind, self.sources[i], self.strengths[m])


def build_init_corpus(images, kind: StandardOp, m_levels=40) -> InitCorpus:
    """Strength sweep corpus: M uniform levels spanning [-1, 1]."""
    if m_levels < 2:
        raise ValueError("corpus needs at least 2 strength levels")
    strengths = np.linspace(-1.0, 1.0, m_levels, dtype=np.float32)
    return InitCorpus(kind, strengths, [np.asarray(i, np.float32) for i in images])


def init_losses(op: NeurOpParams, corpus: InitCorpus):
    """Full unary and pairwise imitation residuals over the whole corpus.

    Returns (unary, pairwise): mean L1 of R(I_m, 0) vs I_m, and of
    R(I_m, v_n - v_m) vs I_n over all ordered pairs m != n.
    """
    m_levels = corpus.num_levels
    if m_levels < 2:
        raise ValueError("pairwise loss undefined for fewer than 2 levels")
    unary = []
    pairwise = []
    for i in range(len(corpus.sources)):
        variants = [corpus.variant(i, m) for m in range(m_levels)]
        for m in range(m_levels):
            flat = variants[m].reshape(-1, 3)
            out, _ = neurop_train_forward(flat, np.float32(0.0), op)
            unary.append(float(np.abs(out - flat).mean()))
            for n in range(m_levels):
                if n == m:
                    continue
                dv = corpus.strengths[n] - corpus.strengths[m]
                out, _ = neurop_train_forward(flat, dv, op)
                tgt = variants[n].reshape(-1, 3)
                pairwise.append(float(np.abs(out - tgt).mean()))
    return float(np.mean(unary)), float(np.mean(pairwise))


# --- corpus-driven warm start -------------------------------------------
#
# The prescribed Adam schedule for operator initialization is short and
# low-rate, so the weights it starts from decide how close the imitation
# can get. Before the gradient loop, the construction below fits the
# operator to the corpus directly: ridge-fit the output layer on hidden
# features, re-point weak hidden units at high-residual regions
# (cascade-correlation style), and refine the hidden layer by per-unit
# alternating least squares. Everything uses corpus images only.


def _gather_fit_samples(op, corpus, rng, px_per_term=128, unary_weight=8.0):
    """Sampled (color, dv, target, weight) rows across all level pairs.

    Unary rows (m == n) are upweighted so the fit optimizes the same
    unary/pairwise balance as the sampled training objective.
    """
    m_levels = corpus.num_levels
    cols, dvs, targets, weights = [], [], [], []
    for i in range(len(corpus.sources)):
        for m in range(m_levels):
            img_m = corpus.variant(i, m).reshape(-1, 3)
            for n in range(m_levels):
                img_n = corpus.variant(i, n).reshape(-1, 3)
                idx = rng.integers(img_m.shape[0], size=px_per_term)
                dv = float(corpus.strengths[n] - corpus.strengths[m])
                cols.append(img_m[idx])
                targets.append(img_n[idx])
                dvs.append(np.full(px_per_term, dv, np.float32))
                weights.append(
                    np.full(px_per_term, unary_weight if n == m else 1.0)
                )
    return (
        np.concatenate(cols),
        np.concatenate(dvs),
        np.concatenate(targets).astype(np.float64),
        np.concatenate(weights),
    )


def _features(op, colors, dvs):
    from neurop.nn import fc_forward

    z = fc_forward(colors, op.encoder) + dvs[:, None]
    return z.astype(np.float64)


def _hidden(op, feats):
    w2 = op.decoder_hidden.weight.astype(np.float64)
    b2 = op.decoder_hidden.bias.astype(np.float64)
    return np.maximum(feats @ w2.T + b2, 0.0)


def _fit_output_layer(op, hidden, targets, weights, lam=1e-4):
    """Weighted ridge fit of the output layer; returns per-row L1 residual."""
    ha = np.concatenate([hidden, np.ones((hidden.shape[0], 1))], axis=1)
    w0 = np.concatenate(
        [op.decoder_out.weight, op.decoder_out.bias[:, None]], axis=1
    ).astype(np.float64)
    hw = ha * weights[:, None]
    a = hw.T @ ha + lam * weights.sum() * np.eye(ha.shape[1])
    b = hw.T @ (targets - ha @ w0.T)
    w = w0 + np.linalg.solve(a, b).T
    op.decoder_out.weight[:] = w[:, :-1].astype(np.float32)
    op.decoder_out.bias[:] = w[:, -1].astype(np.float32)
    return np.abs(targets - ha @ w.T).sum(axis=1)


def _set_hinge_unit(op, j, mask, alpha, v_coeff, bias):
    """Re-point hidden unit j at a fresh (color, strength) hinge."""
    gamma = v_coeff - 1.0
    op.encoder.weight[j] = (alpha * mask).astype(np.float32)
    op.encoder.bias[j] = 0.0
    op.decoder_hidden.weight[j] = 0.0
    op.decoder_hidden.weight[j, j] = 1.0
    op.decoder_hidden.weight[j, 3] = gamma  # mixes the pure-v channel
    op.decoder_hidden.bias[j] = np.float32(bias - 3.0 * gamma)
    op.decoder_out.weight[:, j] = 0.0


def _recruit_hidden_units(op, colors, dvs, targets, weights, rng,
                          rounds=3, batch=12):
    """Move the least-used hidden units onto high-residual sample points.

    Recruits mostly channel-symmetric triplets (one hinge per color
    channel) since tone operators treat channels alike; the rest are
    luminance hinges for cross-channel effects.
    """
    eye = np.eye(3, dtype=np.float32)
    luma = np.full(3, 1.0 / 3.0, np.float32)
    for _ in range(rounds):
        resid = _fit_output_layer(
            op, _hidden(op, _features(op, colors, dvs)), targets, weights
        )
        usage = np.abs(op.decoder_out.weight).max(axis=0)
        usage[:4] = np.inf  # keep identity carriers and the pure-v unit
        weak = list(np.argsort(usage)[:batch])
        prob = (resid * weights) ** 2
        prob /= prob.sum()
        while weak:
            s = int(rng.choice(len(resid), p=prob))
            p_star, dv_star = colors[s], float(dvs[s])
            alpha = float(rng.choice([0.5, 1.0, 2.0, 3.0]))
            v_coeff = float(rng.choice([0.5, 1.0, 1.5, 2.0, 3.0]))
            if rng.random() < 0.6 and len(weak) >= 3:
                bias = -(alpha * float(p_star.mean()) + v_coeff * dv_star) + 0.05
                for c in range(3):
                    _set_hinge_unit(op, weak.pop(), eye[c], alpha, v_coeff, bias)
            else:
                bias = -(alpha * float(luma @ p_star) + v_coeff * dv_star) + 0.05
                _set_hinge_unit(op, weak.pop(), luma, alpha, v_coeff, bias)
    _fit_output_layer(
        op, _hidden(op, _features(op, colors, dvs)), targets, weights
    )


def _refine_hidden_layer(op, colors, dvs, targets, weights, rng,
                         sweeps=2, lam_trust=3e-4):
    """Per-unit alternating least squares on the hidden layer.

    Each unit's incoming weights solve a trust-region ridge problem
    against the current residual, restricted to samples where the unit is
    active; the output layer refits after every sweep.
    """
    feats = _features(op, colors, dvs)
    w2 = op.decoder_hidden.weight.astype(np.float64)
    b2 = op.decoder_hidden.bias.astype(np.float64)
    pre = feats @ w2.T + b2
    hidden = np.maximum(pre, 0.0)
    _fit_output_layer(op, hidden, targets, weights)
    f = w2.shape[0]
    for _ in range(sweeps):
        w3 = op.decoder_out.weight.astype(np.float64)
        b3 = op.decoder_out.bias.astype(np.float64)
        out = hidden @ w3.T + b3
        for j in rng.permutation(np.arange(4, f)):
            w3j = w3[:, j]
            nrm = float(w3j @ w3j)
            if nrm < 1e-8:
                continue
            active = pre[:, j] > 0
            if active.sum() < 200:
                continue
            # scalar target for this unit's activation
            tgt = (targets - out) @ w3j / nrm + hidden[:, j]
            fa = feats[active]
            wa = weights[active]
            xa = np.concatenate([fa, np.ones((fa.shape[0], 1))], axis=1)
            w_old = np.concatenate([w2[j], [b2[j]]])
            xw = xa * wa[:, None]
            m = xw.T @ xa + lam_trust * wa.sum() * np.eye(f + 1)
            rhs = xw.T @ (tgt[active] - xa @ w_old)
            w_new = w_old + np.linalg.solve(m, rhs)
            w2[j] = w_new[:-1]
            b2[j] = w_new[-1]
            pre[:, j] = feats @ w2[j] + b2[j]
            h_new = np.maximum(pre[:, j], 0.0)
            out += np.outer(h_new - hidden[:, j], w3j)
            hidden[:, j] = h_new
        op.decoder_hidden.weight[:] = w2.astype(np.float32)
        op.decoder_hidden.bias[:] = b2.astype(np.float32)
        _fit_output_layer(op, hidden, targets, weights)


def warm_start_operator(op: NeurOpParams, corpus: InitCorpus, rng, blocks=3):
    """Direct corpus fit used as the starting point of train_init."""
    colors, dvs, targets, weights = _gather_fit_samples(op, corpus, rng)
    for _ in range(blocks):
        _recruit_hidden_units(op, colors, dvs, targets, weights, rng)
        _refine_hidden_layer(op, colors, dvs, targets, weights, rng)


# --- sampled-gradient refinement ------------------------------------------


def _l1_term(op, flat_in, v, flat_target, rng, pixel_subsample):
    """Loss and grads for one |R(I, v) - target| term (pixel-subsampled)."""
    if pixel_subsample and pixel_subsample < flat_in.shape[0]:
        idx = rng.integers(flat_in.shape[0], size=pixel_subsample)
        flat_in = flat_in[idx]
        flat_target = flat_target[idx]
    out, cache = neurop_train_forward(flat_in, v, op)
    loss = float(np.abs(out - flat_target).mean())
    g = np.sign(out - flat_target) / out.size
    _, grads, _ = neurop_train_backward(op, cache, g)
    return loss, grads


def train_init(op: NeurOpParams, corpus: InitCorpus, config: TrainConfig,
               log_every=0):
    """Teach one operator to imitate a surrogate-operator corpus.

    Builds the warm start (see warm_start_operator), then Adam-minimizes
    the unary + pairwise imitation residuals by stochastic term sampling:
    each step draws a small batch of unary terms (random image, random
    level) and ordered-pair terms. Returns a loss history, one entry per
    Adam step.
    """
    rng = np.random.default_rng(config.seed)
    m_levels = corpus.num_levels
    if m_levels < 2:
        raise ValueError("pairwise loss undefined for fewer than 2 levels")
    if config.init_warm_start:
        warm_start_operator(op, corpus, rng)
    params = op.param_arrays()
    opt = Adam(lr=config.init_lr, beta1=config.beta1, beta2=config.beta2,
               eps=config.eps)
    n_sources = len(corpus.sources)
    sub = config.init_pixel_subsample
    history = []
    for step in range(config.init_iterations):
        loss = 0.0
        grads = [np.zeros_like(p) for p in params]

        for _ in range(config.init_batch_unary):
            i = int(rng.integers(n_sources))
            m = int(rng.integers(m_levels))
            flat = corpus.variant(i, m).reshape(-1, 3)
            term_loss, term_grads = _l1_term(op, flat, np.float32(0.0), flat,
                                             rng, sub)
            loss += term_loss / config.init_batch_unary
            for g, tg in zip(grads, term_grads):
                g += tg / config.init_batch_unary

        for _ in range(config.init_batch_pairs):
            i = int(rng.integers(n_sources))
            m = int(rng.integers(m_levels))
            n = int(rng.integers(m_levels - 1))
            if n >= m:
                n += 1
            flat = corpus.variant(i, m).reshape(-1, 3)
            target = corpus.variant(i, n).reshape(-1, 3)
            dv = corpus.strengths[n] - corpus.strengths[m]
            term_loss, term_grads = _l1_term(op, flat, dv, target, rng, sub)
            loss += term_loss / config.init_batch_pairs
            for g, tg in zip(grads, term_grads):
                g += tg / config.init_batch_pairs

        if not np.isfinite(loss):
            raise RuntimeError(f"initialization diverged at step {step}: loss={loss}")
        opt.step(params, grads)
        history.append(loss)
        if log_every and (step + 1) % log_every == 0:
            recent = float(np.mean(history[-log_every:]))
            print(f"  init step {step + 1}/{config.init_iterations} "
                  f"loss {recent:.5f}")
    return history


def init_op_kinds(num_ops) -> list:
    """Surrogate operator per chain position (shadows, brightness, color)."""
    order = [StandardOp.BLACK_CLIPPING, StandardOp.EXPOSURE, StandardOp.VIBRANCE]
    if not 1 <= num_ops <= len(order):
        raise ValueError(
            f"standard-operator initialization defined for 1..{len(order)} "
            f"operators, got {num_ops}"
        )
    return order[:num_ops]


# ---------------------------------------------------------------------------
# augmentation


def augment(pair: ImagePair, rng, crop_size=256) -> ImagePair:
    """Random crop plus rotation by a multiple of 90 degrees.

    The same window and rotation apply to input, target and mask.
    """
    h, w = pair.input.shape[:2]
    if crop_size > min(h, w):
        raise ValueError(f"crop {crop_size} larger than image {h}x{w}")
    ch = cw = crop_size
    y0 = int(rng.integers(h - ch + 1))
    x0 = int(rng.integers(w - cw + 1))
    rot = int(rng.integers(4))

    def cut(img):
        out = img[y0 : y0 + ch, x0 : x0 + cw]
        return np.ascontiguousarray(np.rot90(out, rot))

    mask = cut(pair.mask) if pair.mask is not None else None
    return ImagePair(cut(pair.input), cut(pair.target), mask, pair.id)


# ---------------------------------------------------------------------------
# joint end-to-end training


def _downsample_train(img, target):
    h, w = img.shape[:2]
    long_edge = max(h, w)
    if long_edge <= target:
        return img, False
    scale = target / long_edge
    if h >= w:
        nh, nw = target, max(1, round(w * scale))
    else:
        nh, nw = max(1, round(h * scale)), target
    return numpy_impl.resize_bilinear(img, nh, nw), True


def pipeline_forward_backward(model: RetouchModel, img, target,
                              weights: LossWeights, mask=None, hrp_weight=5.0):
    """One full forward + backward through the K-step retouching loop.

    Returns (loss, grads, strengths) with grads ordered exactly like
    model.param_arrays(). Gradients flow into earlier operators both
    through the pixel chain and through each predictor's downsampled view.
    """
    k_ops = model.num_ops
    shape = img.shape
    flat = img.reshape(-1, 3)
    op_caches = []
    pred_caches = []
    strengths = []
    current = img
    for k in range(k_ops):
        small, resized = _downsample_train(current, model.downsample_target)
        v, pcache = predictor_train_forward(small, model.predictors, k)
        out_flat, ocache = neurop_train_forward(flat, np.asarray(v, img.dtype), model.neurops[k])
        pred_caches.append((pcache, resized, current.shape))
        op_caches.append(ocache)
        flat = out_flat
        current = out_flat.reshape(shape)
        strengths.append(v)

    loss = loss_total(current, target, weights, mask, hrp_weight)
    gimg = loss_total_backward(current, target, weights, mask, hrp_weight)

    op_grads = [None] * k_ops
    head_grads = [None] * k_ops
    backbone_grads = [None] * len(model.predictors.backbones)
    gflat = gimg.reshape(-1, 3)
    for k in range(k_ops - 1, -1, -1):
        gflat_in, op_grads[k], gv = neurop_train_backward(
            model.neurops[k], op_caches[k], gflat
        )
        pcache, resized, in_shape = pred_caches[k]
        gsmall, bb_g, head_grads[k] = predictor_train_backward(
            model.predictors, k, pcache, gv
        )
        slot = 0 if model.predictors.shared else k
        if backbone_grads[slot] is None:
            backbone_grads[slot] = bb_g
        else:
            backbone_grads[slot] = [a + b for a, b in zip(backbone_grads[slot], bb_g)]
        if resized:
            gsmall = numpy_impl.resize_bilinear_backward(
                gsmall, in_shape[0], in_shape[1]
            )
        gflat = gflat_in + gsmall.reshape(-1, 3)

    grads = []
    for g in op_grads:
        grads += g
    for g in backbone_grads:
        grads += g
    for g in head_grads:
        grads += g
    return loss, grads, strengths


def evaluate_model(model: RetouchModel, dataset: Dataset) -> dict:
    """Mean PSNR / SSIM / color difference of automatic retouching."""
    scores = {"psnr": [], "ssim": [], "delta_e": []}
    for pair in dataset.pairs:
        out = retouch(pair.input, model).output
        gt = clamp01(pair.target)
        scores["psnr"].append(psnr(out, gt))
        scores["ssim"].append(ssim(out, gt))
        scores["delta_e"].append(delta_e(out, gt))
    return {k: float(np.mean(v)) for k, v in scores.items()}


def train_joint(model: RetouchModel, dataset: Dataset, config: TrainConfig,
                checkpoint_dir=None, heldout=None, log_every=0):
    """Jointly train operators and predictors end to end.

    neurop_mode 'standard-fix' freezes the operators and trains only the
    predictors. Deterministic under a fixed seed. Returns the per-step
    loss history.
    """
    from neurop import weights_io  # local import; weights_io imports model types

    if len(dataset.pairs) == 0:
        raise ValueError("empty training dataset")
    rng = np.random.default_rng(config.seed)
    weights = LossWeights(config.lambda_tv, config.lambda_color, config.loss_terms)
    freeze_ops = config.neurop_mode == "standard-fix"

    all_params = model.param_arrays()
    n_op_arrays = sum(len(op.param_arrays()) for op in model.neurops)
    if freeze_ops:
        trainable = list(range(n_op_arrays, len(all_params)))
    else:
        trainable = list(range(len(all_params)))
    opt = Adam(lr=config.lr, beta1=config.beta1, beta2=config.beta2, eps=config.eps)

    history = []
    last_checkpoint = None
    for step in range(config.iterations):
        pair = dataset.pairs[int(rng.integers(len(dataset.pairs)))]
        if config.augment:
            # configured crop falls back to the full image when larger
            crop = min(config.crop_size, *pair.input.shape[:2])
            pair = augment(pair, rng, crop)
        mask = pair.mask if config.use_masks else None
        loss, grads, _ = pipeline_forward_backward(
            model, pair.input, pair.target, weights, mask, config.hrp_weight
        )
        if not np.isfinite(loss):
            msg = f"joint training diverged at step {step}: loss={loss}"
            if last_checkpoint is not None:
                msg += f"; last good checkpoint: {last_checkpoint}"
            raise RuntimeError(msg)
        opt.step([all_params[i] for i in trainable], [grads[i] for i in trainable])
        history.append(loss)

        done = step + 1
        if checkpoint_dir is not None and (
            done % config.checkpoint_interval == 0 or done == config.iterations
        ):
            from pathlib import Path

            path = Path(checkpoint_dir) / f"checkpoint_{done:07d}.nop"
            weights_io.save_weights(path, model, config=config, optimizer=opt)
            last_checkpoint = path
        if log_every and done % log_every == 0:
            recent = float(np.mean(history[-log_every:]))
            line = f"  step {done}/{config.iterations} loss {recent:.5f}"
            if heldout is not None:
                stats = evaluate_model(model, heldout)
                line += (f" | held-out psnr {stats['psnr']:.2f} dB "
                         f"dE {stats['delta_e']:.2f}")
            print(line)
    return history
