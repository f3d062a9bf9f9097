"""Command-line entry points.

Subcommands:
    init-ops   build strength-sweep corpora and imitation-train each operator
    train      joint end-to-end training on a paired dataset
    infer      retouch one image (predicted or explicit strengths)
    eval       PSNR / SSIM / color-difference table over a dataset
    serve      start the HTTP re-editing service
    summary    parameter accounting of a weight file
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from neurop import __version__
from neurop.backend import backend_name

REFERENCE_TOTAL_PARAMS = 28_108  # published compact-design target


def _build_parser():
    p = argparse.ArgumentParser(prog="neurop", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"neurop {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, weights=True):
        sp.add_argument("--config", type=Path, help="YAML key-value config file")
        sp.add_argument("--preset", choices=["paper", "desk"], default=None)
        sp.add_argument("--seed", type=int, default=None)
        if weights:
            sp.add_argument("--weights", type=Path, help="weight file path")

    sp = sub.add_parser("init-ops", help="imitation-train operators from corpora")
    common(sp)
    sp.add_argument("--images", type=Path, required=True,
                    help="directory of corpus source images")
    sp.add_argument("--out", type=Path, required=True, help="output weight file")

    sp = sub.add_parser("train", help="joint end-to-end training")
    common(sp)
    sp.add_argument("--dataset", type=Path, required=True,
                    help="dataset root (input/, target/[, masks/])")
    sp.add_argument("--out", type=Path, required=True, help="output weight file")
    sp.add_argument("--checkpoint-dir", type=Path, default=None)
    sp.add_argument("--log-every", type=int, default=0)

    sp = sub.add_parser("infer", help="retouch one image")
    common(sp)
    sp.add_argument("image", type=Path)
    sp.add_argument("--output", type=Path, required=True)
    sp.add_argument("--strengths", type=str, default=None,
                    help="comma-separated values; bypasses the predictors")
    sp.add_argument("--emit-intermediates", action="store_true")

    sp = sub.add_parser("eval", help="metric table over a paired dataset")
    common(sp)
    sp.add_argument("dataset", type=Path)

    sp = sub.add_parser("serve", help="start the HTTP service")
    common(sp)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=None,
                    help="defaults to $NEUROP_PORT or 8080")

    sp = sub.add_parser("summary", help="parameter accounting of a weight file")
    common(sp)
    return p


def _load_config(args, **overrides):
    from neurop.config import load_config, make_config

    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.config is not None:
        return load_config(args.config, preset=args.preset, **overrides)
    return make_config(args.preset or "desk", **overrides)


def _require_weights(args):
    from neurop.weights_io import load_weights

    if args.weights is None:
        raise SystemExit("this command needs --weights")
    model, manifest, _ = load_weights(args.weights)
    return model, manifest


def _cmd_init_ops(args):
    from neurop.config import new_model
    from neurop.data import imread
    from neurop.training import build_init_corpus, init_losses, init_op_kinds, train_init
    from neurop.weights_io import save_weights

    config = _load_config(args)
    paths = sorted(
        p for p in Path(args.images).iterdir()
        if p.suffix.lower() in (".png", ".tif", ".tiff", ".jpg", ".jpeg")
    )
    if not paths:
        raise SystemExit(f"no images found in {args.images}")
    images = [imread(p) for p in paths]
    rng = np.random.default_rng(config.seed)
    model = new_model(config, rng)
    kinds = init_op_kinds(config.num_ops)
    for k, kind in enumerate(kinds):
        print(f"[{k + 1}/{len(kinds)}] imitating {kind.value} "
              f"({config.init_iterations} steps at lr {config.init_lr})")
        corpus = build_init_corpus(images, kind, config.corpus_size)
        train_init(model.neurops[k], corpus, config,
                   log_every=max(config.init_iterations // 5, 1))
        unary, pairwise = init_losses(model.neurops[k], corpus)
        print(f"    residuals: identity {unary:.4f}, strength-pairs {pairwise:.4f}")
    save_weights(args.out, model, config=config,
                 provenance={"stage": "init-ops", "seed": config.seed,
                             "preset": config.preset})
    print(f"wrote {args.out}")
    return 0


def _cmd_train(args):
    from neurop.config import new_model
    from neurop.data import load_pair_dataset
    from neurop.training import evaluate_model, train_joint
    from neurop.weights_io import load_weights, save_weights

    config = _load_config(args)
    dataset = load_pair_dataset(args.dataset)
    if args.weights is not None:
        model, _, _ = load_weights(args.weights)
    else:
        if config.neurop_mode != "random":
            raise SystemExit(
                "standard-operator modes need --weights from init-ops; "
                "use neurop_mode: random to train from scratch"
            )
        model = new_model(config, np.random.default_rng(config.seed))
    print(f"training on {len(dataset.pairs)} pairs, {config.iterations} steps "
          f"(backend: {backend_name()})")
    train_joint(model, dataset, config, checkpoint_dir=args.checkpoint_dir,
                log_every=args.log_every)
    stats = evaluate_model(model, dataset)
    print(f"train-set metrics: psnr {stats['psnr']:.2f} dB, "
          f"ssim {stats['ssim']:.4f}, dE {stats['delta_e']:.2f}")
    save_weights(args.out, model, config=config,
                 provenance={"stage": "train", "seed": config.seed,
                             "preset": config.preset,
                             "iterations": config.iterations})
    print(f"wrote {args.out}")
    return 0


def _parse_strengths(text, expected):
    try:
        values = [float(x) for x in text.split(",")]
    except ValueError:
        raise SystemExit(f"malformed --strengths {text!r}")
    if len(values) != expected:
        raise SystemExit(f"expected {expected} strengths, got {len(values)}")
    return values


def _cmd_infer(args):
    from neurop.data import imread, imwrite
    from neurop.pipeline import retouch, retouch_with_strengths

    model, _ = _require_weights(args)
    img = imread(args.image)
    if args.strengths is not None:
        values = _parse_strengths(args.strengths, model.num_ops)
        out = retouch_with_strengths(img, model, values)
        print("strengths (given):", ",".join(f"{v:.6f}" for v in values))
        intermediates = None
    else:
        result = retouch(img, model)
        out = result.output
        intermediates = result.intermediates
        print("strengths (predicted):",
              ",".join(f"{v:.6f}" for v in result.strengths))
    imwrite(args.output, out)
    print(f"wrote {args.output}")
    if args.emit_intermediates and intermediates is not None:
        for k, inter in enumerate(intermediates, 1):
            path = args.output.with_name(
                f"{args.output.stem}_step{k}{args.output.suffix}"
            )
            imwrite(path, inter)
            print(f"wrote {path}")
    return 0


def _cmd_eval(args):
    from neurop.data import load_pair_dataset
    from neurop.training import evaluate_model

    model, _ = _require_weights(args)
    dataset = load_pair_dataset(args.dataset)
    if not dataset.pairs:
        raise SystemExit(f"no pairs found under {args.dataset}")
    stats = evaluate_model(model, dataset)
    print(f"{'pairs':>8}  {'PSNR (dB)':>10}  {'SSIM':>8}  {'dE*ab':>8}")
    print(f"{len(dataset.pairs):>8}  {stats['psnr']:>10.2f}  "
          f"{stats['ssim']:>8.4f}  {stats['delta_e']:>8.2f}")
    return 0


def _cmd_serve(args):
    import os

    import uvicorn

    from neurop.service import create_app

    model, _ = _require_weights(args)
    port = args.port or int(os.environ.get("NEUROP_PORT", "8080"))
    app = create_app(model)
    uvicorn.run(app, host=args.host, port=port, log_level="info")
    return 0


def _cmd_summary(args):
    from neurop.pipeline import model_summary

    model, manifest = _require_weights(args)
    s = model_summary(model)
    print(f"operators: {s['num_ops']} x {s['per_operator'][0]} params "
          f"(feature dim {s['feature_dim']}) = {s['operators_total']}")
    shared = "shared" if s["backbone_shared"] else "private per head"
    print(f"predictor backbone ({shared}): {s['predictor_backbone']}")
    print(f"predictor heads: {' + '.join(str(h) for h in s['predictor_heads'])}")
    print(f"total trainable parameters: {s['total']} "
          f"(reference compact design: {REFERENCE_TOTAL_PARAMS})")
    prov = manifest.get("provenance") or {}
    if prov:
        print("provenance:", ", ".join(f"{k}={v}" for k, v in sorted(prov.items())))
    return 0


_COMMANDS = {
    "init-ops": _cmd_init_ops,
    "train": _cmd_train,
    "infer": _cmd_infer,
    "eval": _cmd_eval,
    "serve": _cmd_serve,
    "summary": _cmd_summary,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except SystemExit:
        raise
    except (ValueError, RuntimeError, IOError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
