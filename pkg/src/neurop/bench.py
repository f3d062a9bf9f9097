"""Kernel backend benchmark: numba vs pure numpy, side by side.

Run with `python -m neurop.bench [--pixels N]`. Reports wall times for the
fused color-operator map (the throughput-critical kernel), conv forward
and bilinear resize, plus the max absolute difference between backends.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from neurop.kernels import numpy_impl


def _time(fn, repeats=3):
    fn()  # warm (first numba call compiles)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--pixels", type=int, default=1_000_000)
    parser.add_argument("--feature-dim", type=int, default=64)
    args = parser.parse_args(argv)

    backends = [("numpy", numpy_impl)]
    try:
        from neurop.kernels import numba_impl

        backends.append(("numba", numba_impl))
    except ImportError:
        print("numba unavailable; benchmarking the numpy fallback only")

    rng = np.random.default_rng(0)
    f = args.feature_dim
    n = args.pixels
    colors = rng.random((n, 3), dtype=np.float32)
    weights = (
        (rng.standard_normal((f, 3)) * 0.4).astype(np.float32),
        rng.standard_normal(f).astype(np.float32),
        (rng.standard_normal((f, f)) * 0.15).astype(np.float32),
        rng.standard_normal(f).astype(np.float32),
        (rng.standard_normal((3, f)) * 0.15).astype(np.float32),
        rng.standard_normal(3).astype(np.float32),
    )
    conv_w = (rng.standard_normal((8, 3, 7, 7)) * 0.1).astype(np.float32)
    conv_b = rng.standard_normal(8).astype(np.float32)
    side = max(int(np.sqrt(n)), 8)
    img = rng.random((side, side, 3), dtype=np.float32)
    conv_img = rng.random((3, 256, 256), dtype=np.float32)

    cases = {
        "color-op map": lambda impl: impl.neurop_apply(
            colors, *weights, np.float32(0.3)
        ),
        "conv k7s2p1 256px": lambda impl: impl.conv2d_forward(
            conv_img, conv_w, conv_b, 2, 1
        ),
        "bilinear resize ->256": lambda impl: impl.resize_bilinear(
            img, 256 * img.shape[0] // max(img.shape[:2]),
            256 * img.shape[1] // max(img.shape[:2]),
        ),
    }

    print(f"{args.pixels:,} pixels, feature dim {f}\n")
    print(f"{'kernel':<24}" + "".join(f"{name:>12}" for name, _ in backends)
          + f"{'max |diff|':>14}")
    for case, runner in cases.items():
        times = []
        results = []
        for _, impl in backends:
            times.append(_time(lambda impl=impl: runner(impl)))
            results.append(runner(impl))
        diff = (
            float(np.max(np.abs(results[0] - results[1])))
            if len(results) > 1 else 0.0
        )
        row = f"{case:<24}" + "".join(f"{t * 1e3:>10.1f}ms" for t in times)
        print(row + f"{diff:>14.2e}")

    # end-to-end: the K=3 chain including palette dedup, per backend flag
    from neurop.config import make_config, new_model
    from neurop.pipeline import retouch_with_strengths

    model = new_model(make_config("desk"), rng)
    big = (rng.integers(0, 256, (side, side, 3)) / 255.0).astype(np.float32)
    t = _time(lambda: retouch_with_strengths(big, model, [0.3, -0.2, 0.4]))
    from neurop.backend import backend_name

    print(f"\nretouch_with_strengths K=3 on {side}x{side} "
          f"({backend_name()} backend): {t * 1e3:.0f} ms")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
