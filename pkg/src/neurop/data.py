"""Dataset ingestion and synthetic data generation.

Directory layout for paired datasets:

    root/input/<stem>.(png|tif|tiff|jpg)
    root/target/<stem>.*
    root/masks/<stem>.*        optional human-region masks

Pairs are matched by filename stem; 8-bit and 16-bit files are normalized
to float32 in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from neurop.color import StandardOp, standard_op_apply
from neurop.kernels import numpy_impl

_EXTENSIONS = (".png", ".tif", ".tiff", ".jpg", ".jpeg")


@dataclass
class ImagePair:
    input: np.ndarray  # (H, W, 3) float32 [0,1]
    target: np.ndarray
    mask: np.ndarray | None  # (H, W) float32 {0,1}
    id: str


@dataclass
class Dataset:
    pairs: list
    split: str = "train"

    def __len__(self):
        return len(self.pairs)

    def __getitem__(self, i):
        return self.pairs[i]


def _normalize_raw(raw) -> np.ndarray:
    if raw.ndim == 2:
        raw = raw[:, :, None].repeat(3, axis=2)
    if raw.shape[2] == 4:
        raw = raw[:, :, :3]
    raw = raw[:, :, ::-1]  # BGR -> RGB
    if raw.dtype == np.uint8:
        return (raw.astype(np.float32) / 255.0).copy()
    if raw.dtype == np.uint16:
        return (raw.astype(np.float32) / 65535.0).copy()
    raise ValueError(f"unsupported bit depth {raw.dtype}")


def imread(path) -> np.ndarray:
    """Read an image file as (H, W, 3) float32 in [0, 1]."""
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ValueError(f"cannot read image {path}")
    return _normalize_raw(raw)


def decode_image_bytes(data: bytes) -> np.ndarray:
    """Decode an in-memory PNG/JPEG/TIFF to (H, W, 3) float32 in [0, 1]."""
    raw = cv2.imdecode(np.frombuffer(data, np.uint8), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ValueError("cannot decode image data")
    return _normalize_raw(raw)


def encode_image(img, suffix=".png", bits=8) -> bytes:
    """Encode a [0, 1] image to file bytes; the single encoder used by
    both the file writer and the HTTP service, so renders byte-match."""
    arr = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    if bits == 16:
        if suffix.lower() not in (".tif", ".tiff", ".png"):
            raise ValueError("16-bit output needs a TIFF or PNG suffix")
        data = np.rint(arr * 65535.0).astype(np.uint16)
    elif bits == 8:
        data = np.rint(arr * 255.0).astype(np.uint8)
    else:
        raise ValueError("bits must be 8 or 16")
    if data.ndim == 3:
        data = data[:, :, ::-1]  # RGB -> BGR
    ok, buf = cv2.imencode(suffix, data)
    if not ok:
        raise IOError(f"failed to encode {suffix} image")
    return buf.tobytes()


def imwrite(path, img, bits=8):
    """Write a [0, 1] image; 8-bit for PNG/JPEG, 8 or 16 for TIFF."""
    path = Path(path)
    Path(path).write_bytes(encode_image(img, path.suffix, bits))


def _mask_read(path) -> np.ndarray:
    m = imread(path)[:, :, 0]
    return (m > 0.5).astype(np.float32)


def _stems(directory: Path) -> dict:
    files = {}
    if not directory.is_dir():
        return files
    for p in sorted(directory.iterdir()):
        if p.suffix.lower() in _EXTENSIONS:
            files[p.stem] = p
    return files


def load_pair_dataset(root, split="train") -> Dataset:
    """Load input/target(/masks) pairs matched by filename stem."""
    root = Path(root)
    inputs = _stems(root / "input")
    targets = _stems(root / "target")
    masks = _stems(root / "masks")
    orphan_inputs = sorted(set(inputs) - set(targets))
    orphan_targets = sorted(set(targets) - set(inputs))
    if orphan_inputs or orphan_targets:
        raise ValueError(
            f"unmatched dataset entries in {root}: "
            f"inputs without targets {orphan_inputs}, "
            f"targets without inputs {orphan_targets}"
        )
    pairs = []
    for stem in sorted(inputs):
        inp = imread(inputs[stem])
        tgt = imread(targets[stem])
        if inp.shape != tgt.shape:
            raise ValueError(
                f"pair {stem!r}: input {inp.shape} != target {tgt.shape}"
            )
        mask = None
        if stem in masks:
            mask = _mask_read(masks[stem])
            if mask.shape != inp.shape[:2]:
                raise ValueError(
                    f"pair {stem!r}: mask {mask.shape} != image {inp.shape[:2]}"
                )
        pairs.append(ImagePair(inp, tgt, mask, stem))
    return Dataset(pairs, split)


def save_pair_dataset(root, dataset: Dataset):
    """Write a dataset in the directory layout `load_pair_dataset` reads."""
    root = Path(root)
    (root / "input").mkdir(parents=True, exist_ok=True)
    (root / "target").mkdir(parents=True, exist_ok=True)
    has_masks = any(p.mask is not None for p in dataset.pairs)
    if has_masks:
        (root / "masks").mkdir(parents=True, exist_ok=True)
    for pair in dataset.pairs:
        imwrite(root / "input" / f"{pair.id}.png", pair.input)
        imwrite(root / "target" / f"{pair.id}.png", pair.target)
        if pair.mask is not None:
            imwrite(root / "masks" / f"{pair.id}.png", pair.mask[:, :, None].repeat(3, 2))


# ---------------------------------------------------------------------------
# synthetic paired data


def synthetic_strengths(img):
    """Per-image operator strengths derived from simple global statistics.

    Sequential: each strength is computed on the image produced by the
    previous operator, mirroring how the retouching loop itself works.
    """
    shadow = float(img.min(axis=2).mean())
    v_black = float(np.clip(1.2 * (shadow - 0.18), -0.5, 0.5))
    i1 = standard_op_apply(StandardOp.BLACK_CLIPPING, img, v_black)
    lum = float(i1.mean())
    v_exposure = float(np.clip(1.5 * (0.45 - lum), -0.6, 0.6))
    i2 = standard_op_apply(StandardOp.EXPOSURE, i1, v_exposure)
    sat = float((i2.max(axis=2) - i2.min(axis=2)).mean())
    v_vibrance = float(np.clip(0.35 - sat, -0.5, 0.5))
    i3 = standard_op_apply(StandardOp.VIBRANCE, i2, v_vibrance)
    return (v_black, v_exposure, v_vibrance), i3


def _random_photo(rng, size):
    """Photo-ish random field: smooth base + geometry + grain, 8-bit grid."""
    h = w = size
    base = rng.random((4, 4, 3), dtype=np.float32)
    img = numpy_impl.resize_bilinear(base, h, w)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float32)
    gx = rng.uniform(-0.3, 0.3)
    gy = rng.uniform(-0.3, 0.3)
    img += (gx * xx / w + gy * yy / h)[:, :, None]
    for _ in range(rng.integers(2, 5)):
        cx, cy = rng.uniform(0, w), rng.uniform(0, h)
        r = rng.uniform(size / 10, size / 3)
        blob = np.exp(-(((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * r * r)))
        img += blob[:, :, None] * rng.uniform(-0.35, 0.35, size=3).astype(np.float32)
    img += rng.normal(0.0, 0.01, size=img.shape).astype(np.float32)
    img -= img.min()
    peak = img.max()
    if peak > 0:
        img /= peak
    img *= rng.uniform(0.25, 0.95)  # vary overall exposure
    img = np.rint(np.clip(img, 0.0, 1.0) * 255.0) / np.float32(255.0)
    return img.astype(np.float32)


def make_synthetic_dataset(n, size=128, seed=0, split="train", with_masks=False):
    """Paired data where targets come from the surrogate operator chain."""
    rng = np.random.default_rng(seed)
    pairs = []
    for i in range(n):
        img = _random_photo(rng, size)
        _, target = synthetic_strengths(img)
        mask = None
        if with_masks:
            yy, xx = np.mgrid[0:size, 0:size]
            cy, cx = rng.uniform(0.3, 0.7, size=2) * size
            r = size * rng.uniform(0.15, 0.3)
            mask = (((yy - cy) ** 2 + (xx - cx) ** 2) < r * r).astype(np.float32)
        pairs.append(ImagePair(img, target, mask, f"synth_{i:04d}"))
    return Dataset(pairs, split)
