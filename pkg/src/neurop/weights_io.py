"""Weight files: JSON manifest + concatenated little-endian float32 arrays.

Layout: an 8-byte magic, a little-endian uint64 manifest byte length, the
UTF-8 JSON manifest, then every array listed under manifest["arrays"]
concatenated in order as '<f4'. Round-trips are bit-exact and the format
is endianness-fixed, so files are portable.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from neurop.color import NeurOpParams
from neurop.nn import Adam, ConvLayer, FcLayer
from neurop.pipeline import RetouchModel
from neurop.predictor import PredictorParams

MAGIC = b"NEUROPW\n"
FORMAT_VERSION = 1


def _named_arrays(model: RetouchModel):
    entries = []
    for i, op in enumerate(model.neurops):
        entries += [
            (f"op{i}.encoder.weight", op.encoder.weight),
            (f"op{i}.encoder.bias", op.encoder.bias),
            (f"op{i}.decoder_hidden.weight", op.decoder_hidden.weight),
            (f"op{i}.decoder_hidden.bias", op.decoder_hidden.bias),
            (f"op{i}.decoder_out.weight", op.decoder_out.weight),
            (f"op{i}.decoder_out.bias", op.decoder_out.bias),
        ]
    for j, (c1, c2) in enumerate(model.predictors.backbones):
        entries += [
            (f"backbone{j}.conv1.weight", c1.weight),
            (f"backbone{j}.conv1.bias", c1.bias),
            (f"backbone{j}.conv2.weight", c2.weight),
            (f"backbone{j}.conv2.bias", c2.bias),
        ]
    for i, head in enumerate(model.predictors.heads):
        entries += [(f"head{i}.weight", head.weight), (f"head{i}.bias", head.bias)]
    return entries


def save_weights(path, model: RetouchModel, config=None, optimizer: Adam = None,
                 provenance=None):
    """Serialize a model (optionally with Adam state) to one file."""
    entries = _named_arrays(model)
    if optimizer is not None and optimizer.m:
        for i, m in enumerate(optimizer.m):
            entries.append((f"adam.m.{i}", m))
        for i, v in enumerate(optimizer.v):
            entries.append((f"adam.v.{i}", v))

    conv1 = model.predictors.backbones[0][0]
    conv2 = model.predictors.backbones[0][1]
    manifest = {
        "format_version": FORMAT_VERSION,
        "num_ops": model.num_ops,
        "feature_dim": model.neurops[0].feature_dim,
        "conv1_channels": conv1.weight.shape[0],
        "conv2_channels": conv2.weight.shape[0],
        "conv_kernel": conv1.kernel_size,
        "conv_stride": conv1.stride,
        "conv_padding": conv1.padding,
        "share_backbone": model.predictors.shared,
        "downsample_target": model.downsample_target,
        "provenance": provenance or {},
        "arrays": [
            {"name": n, "shape": list(a.shape)} for n, a in entries
        ],
        "optimizer": None,
    }
    if config is not None:
        manifest["provenance"].setdefault("preset", config.preset)
        manifest["provenance"].setdefault("seed", config.seed)
    if optimizer is not None and optimizer.m:
        manifest["optimizer"] = {
            "t": optimizer.t, "lr": optimizer.lr, "beta1": optimizer.beta1,
            "beta2": optimizer.beta2, "eps": optimizer.eps,
        }

    blob = json.dumps(manifest, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(np.uint64(len(blob)).tobytes())
        fh.write(blob)
        for _, arr in entries:
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_weights(path):
    """Read a weight file; returns (model, manifest, optimizer-or-None)."""
    raw = Path(path).read_bytes()
    if raw[: len(MAGIC)] != MAGIC:
        raise ValueError(f"{path}: not a weight file (bad magic)")
    off = len(MAGIC)
    (blob_len,) = np.frombuffer(raw[off : off + 8], dtype="<u8")
    off += 8
    manifest = json.loads(raw[off : off + int(blob_len)].decode("utf-8"))
    off += int(blob_len)
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ValueError(
            f"{path}: format version {manifest.get('format_version')} "
            f"unsupported (expected {FORMAT_VERSION})"
        )
    expected = sum(
        int(np.prod(e["shape"])) if e["shape"] else 1 for e in manifest["arrays"]
    ) * 4
    payload = raw[off:]
    if len(payload) != expected:
        raise ValueError(
            f"{path}: payload is {len(payload)} bytes, manifest declares {expected}"
        )
    arrays = {}
    pos = 0
    for entry in manifest["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(payload, dtype="<f4", count=count, offset=pos)
        arrays[entry["name"]] = arr.reshape(shape).astype(np.float32)
        pos += count * 4

    stride, padding = manifest["conv_stride"], manifest["conv_padding"]
    k = manifest["num_ops"]
    neurops = []
    for i in range(k):
        neurops.append(
            NeurOpParams(
                FcLayer(arrays[f"op{i}.encoder.weight"], arrays[f"op{i}.encoder.bias"]),
                FcLayer(
                    arrays[f"op{i}.decoder_hidden.weight"],
                    arrays[f"op{i}.decoder_hidden.bias"],
                ),
                FcLayer(
                    arrays[f"op{i}.decoder_out.weight"],
                    arrays[f"op{i}.decoder_out.bias"],
                ),
            )
        )
    backbones = []
    j = 0
    while f"backbone{j}.conv1.weight" in arrays:
        backbones.append(
            (
                ConvLayer(
                    arrays[f"backbone{j}.conv1.weight"],
                    arrays[f"backbone{j}.conv1.bias"], stride, padding,
                ),
                ConvLayer(
                    arrays[f"backbone{j}.conv2.weight"],
                    arrays[f"backbone{j}.conv2.bias"], stride, padding,
                ),
            )
        )
        j += 1
    heads = [
        FcLayer(arrays[f"head{i}.weight"], arrays[f"head{i}.bias"]) for i in range(k)
    ]
    predictors = PredictorParams(backbones, heads, manifest["share_backbone"])
    model = RetouchModel(neurops, predictors, manifest["downsample_target"])
    model.validate()

    optimizer = None
    if manifest.get("optimizer"):
        o = manifest["optimizer"]
        optimizer = Adam(lr=o["lr"], beta1=o["beta1"], beta2=o["beta2"],
                         eps=o["eps"], t=o["t"])
        n = len(model.param_arrays())
        optimizer.m = [arrays[f"adam.m.{i}"].copy() for i in range(n)]
        optimizer.v = [arrays[f"adam.v.{i}"].copy() for i in range(n)]
    return model, manifest, optimizer
