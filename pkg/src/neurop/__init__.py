"""Sequential image retouching with scalar-strength learned color operators."""

__version__ = "0.1.0"

from neurop.backend import backend_name, use_numba
from neurop.color import NeurOpParams, StandardOp, neurop_forward, neurop_forward_image, standard_op_apply
from neurop.config import TrainConfig, load_config, make_config, new_model
from neurop.data import Dataset, ImagePair, load_pair_dataset, make_synthetic_dataset
from neurop.losses import LossWeights, loss_color, loss_reconstruction, loss_total, loss_tv
from neurop.metrics import delta_e, psnr, ssim
from neurop.pipeline import (
    RetouchModel,
    RetouchResult,
    downsample_long_edge,
    model_summary,
    retouch,
    retouch_with_strengths,
)
from neurop.predictor import PredictorParams, predict_strength
from neurop.training import (
    InitCorpus,
    augment,
    build_init_corpus,
    evaluate_model,
    init_losses,
    train_init,
    train_joint,
)
from neurop.weights_io import load_weights, save_weights

__all__ = [
    "Dataset",
    "ImagePair",
    "InitCorpus",
    "LossWeights",
    "NeurOpParams",
    "PredictorParams",
    "RetouchModel",
    "RetouchResult",
    "StandardOp",
    "TrainConfig",
    "augment",
    "backend_name",
    "build_init_corpus",
    "delta_e",
    "downsample_long_edge",
    "evaluate_model",
    "init_losses",
    "load_config",
    "load_pair_dataset",
    "load_weights",
    "loss_color",
    "loss_reconstruction",
    "loss_total",
    "loss_tv",
    "make_config",
    "make_synthetic_dataset",
    "model_summary",
    "neurop_forward",
    "neurop_forward_image",
    "new_model",
    "predict_strength",
    "psnr",
    "retouch",
    "retouch_with_strengths",
    "save_weights",
    "ssim",
    "standard_op_apply",
    "train_init",
    "train_joint",
    "use_numba",
]
