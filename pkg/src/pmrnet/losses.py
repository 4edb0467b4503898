"""Joint BCE + soft-Dice training objective.

total = 0.5 * bce + dice. BCE averages over every pixel in the batch
with natural log by default (pass log_base=2 for the base-2 form); Dice
is computed per sample and averaged over the batch so small objects in
one image are not drowned by another.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch

from .errors import ShapeError

CLAMP_EPS = 1e-7


def _check_shapes(pred: torch.Tensor, target: torch.Tensor) -> None:
    if pred.shape != target.shape:
        raise ShapeError(f"pred {tuple(pred.shape)} vs target {tuple(target.shape)}")


def bce_loss(
    pred: torch.Tensor, target: torch.Tensor, log_base: float | None = None
) -> torch.Tensor:
    """Mean binary cross entropy over all pixels; pred is clamped away from {0,1}."""
    _check_shapes(pred, target)
    p = pred.clamp(CLAMP_EPS, 1.0 - CLAMP_EPS)
    loss = -(target * torch.log(p) + (1.0 - target) * torch.log(1.0 - p)).mean()
    if log_base is not None:
        loss = loss / math.log(log_base)
    return loss


def dice_loss(
    pred: torch.Tensor, target: torch.Tensor, smooth: float = 1e-5
) -> torch.Tensor:
    """1 - soft Dice overlap, per sample, averaged over the batch.

    smooth guards only the denominator, so two empty masks score 1.0.
    """
    _check_shapes(pred, target)
    p = pred.reshape(pred.shape[0], -1)
    t = target.reshape(target.shape[0], -1)
    num = 2.0 * (p * t).sum(dim=1)
    den = (t * t).sum(dim=1) + (p * p).sum(dim=1) + smooth
    return (1.0 - num / den).mean()


@dataclass
class LossBreakdown:
    bce: torch.Tensor
    dice: torch.Tensor
    total: torch.Tensor


def total_loss(
    pred: torch.Tensor,
    target: torch.Tensor,
    smooth: float = 1e-5,
    log_base: float | None = None,
) -> LossBreakdown:
    bce = bce_loss(pred, target, log_base=log_base)
    dice = dice_loss(pred, target, smooth=smooth)
    return LossBreakdown(bce=bce, dice=dice, total=0.5 * bce + dice)
