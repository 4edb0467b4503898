"""Parallel multi-resolution encoder-decoder segmentation networks."""

from .config import (
    NetworkConfig,
    TrainConfig,
    branch_channels,
    channels_at,
    load_config,
    save_config,
    validate_config,
)
from .data import augment_x8, load_dataset, resize_sample, split, synth_dataset
from .engine import (
    count_params,
    evaluate,
    grad_check,
    load_checkpoint,
    measure_inference,
    save_checkpoint,
    train,
)
from .losses import bce_loss, dice_loss, total_loss
from .metrics import accuracy, aggregate, confusion, iou, roc_auc
from .model import PMRNet, VARIANT_NAMES, build_model, build_variant

__version__ = "0.1.0"

__all__ = [
    "NetworkConfig",
    "TrainConfig",
    "PMRNet",
    "VARIANT_NAMES",
    "accuracy",
    "aggregate",
    "augment_x8",
    "bce_loss",
    "branch_channels",
    "build_model",
    "build_variant",
    "channels_at",
    "confusion",
    "count_params",
    "dice_loss",
    "evaluate",
    "grad_check",
    "iou",
    "load_checkpoint",
    "load_config",
    "load_dataset",
    "measure_inference",
    "resize_sample",
    "roc_auc",
    "save_checkpoint",
    "save_config",
    "split",
    "synth_dataset",
    "total_loss",
    "train",
    "validate_config",
]
