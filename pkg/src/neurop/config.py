"""Run configuration: presets, config-file parsing, model construction."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from neurop.color import NeurOpParams
from neurop.pipeline import RetouchModel
from neurop.predictor import PredictorParams


@dataclass
class TrainConfig:
    preset: str = "desk"
    seed: int = 0

    # optimizer
    beta1: float = 0.9
    beta2: float = 0.99
    eps: float = 1e-8

    # operator initialization stage
    init_lr: float = 5e-5
    init_iterations: int = 2_000
    corpus_size: int = 9  # strength levels per source image
    init_batch_unary: int = 2  # sampled identity terms per step
    init_batch_pairs: int = 6  # sampled strength-pair terms per step
    init_pixel_subsample: int = 2048  # pixels per sampled term (0 = all)
    init_warm_start: bool = True  # corpus-fit construction before Adam

    # joint stage
    lr: float = 2e-4
    iterations: int = 20_000
    batch_size: int = 1
    crop_size: int = 256
    augment: bool = True
    neurop_mode: str = "standard-finetune"  # standard-fix | random

    # loss
    lambda_tv: float = 0.1
    lambda_color: float = 0.1
    loss_terms: tuple = ("r", "tv", "c")
    use_masks: bool = False  # weight human regions in the L1 term
    hrp_weight: float = 5.0

    # architecture
    num_ops: int = 3
    feature_dim: int = 64
    conv1_channels: int = 8
    conv2_channels: int = 32
    conv_kernel: int = 7
    conv_stride: int = 2
    conv_padding: int = 1
    share_backbone: bool = True
    downsample_target: int = 256

    checkpoint_interval: int = 1000

    def __post_init__(self):
        if self.iterations < 1 or self.init_iterations < 1:
            raise ValueError("iteration counts must be >= 1")
        if self.neurop_mode not in ("standard-finetune", "standard-fix", "random"):
            raise ValueError(f"unknown neurop_mode {self.neurop_mode!r}")


PRESETS = {
    "desk": {},
    "paper": {
        "init_iterations": 100_000,
        "iterations": 600_000,
        "corpus_size": 40,
        "lr": 5e-5,
        "init_lr": 5e-5,
    },
}


def make_config(preset="desk", **overrides) -> TrainConfig:
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    values = dict(PRESETS[preset])
    values.update(overrides)
    values["preset"] = preset
    return TrainConfig(**values)


def load_config(path, preset=None, **overrides) -> TrainConfig:
    """Read a flat key-value YAML file; explicit overrides win over the file."""
    raw = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(raw, dict):
        raise ValueError(f"config {path} must be a flat key: value mapping")
    known = {f.name for f in dataclasses.fields(TrainConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config keys in {path}: {sorted(unknown)}")
    if "loss_terms" in raw:
        raw["loss_terms"] = tuple(raw["loss_terms"])
    chosen = preset or raw.pop("preset", "desk")
    raw.update(overrides)
    return make_config(chosen, **raw)


def new_model(config: TrainConfig, rng=None, scheme="identity") -> RetouchModel:
    """Fresh model per the configured architecture."""
    rng = rng or np.random.default_rng(config.seed)
    neurops = [
        NeurOpParams.create(rng, config.feature_dim, scheme=scheme)
        for _ in range(config.num_ops)
    ]
    predictors = PredictorParams.create(
        rng,
        config.num_ops,
        c1=config.conv1_channels,
        c2=config.conv2_channels,
        kernel=config.conv_kernel,
        stride=config.conv_stride,
        padding=config.conv_padding,
        shared=config.share_backbone,
    )
    model = RetouchModel(neurops, predictors, config.downsample_target)
    model.validate()
    return model
