"""Composite building blocks shared by the encoder, context and decoder.

Every block is two (3x3 conv -> BN -> ReLU) units, optionally followed by
2x2 max pooling (downsampling path) or a bilinear resize (upsampling path).
Convolutions carry no bias (the following BN makes it redundant) and use
Kaiming fan-in initialization.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import OddSizeError, ShapeError


def resize_bilinear(x: torch.Tensor, target_hw: tuple[int, int]) -> torch.Tensor:
    """Bilinear resize with half-pixel centers (align_corners=False).

    Exact identity (the same tensor) when the target equals the source;
    used both for x2 upsampling in fusion and for input downsampling.
    """
    h, w = int(target_hw[0]), int(target_hw[1])
    if x.shape[-2] == h and x.shape[-1] == w:
        return x
    return F.interpolate(x, size=(h, w), mode="bilinear", align_corners=False)


def fuse_concat(maps: list[torch.Tensor]) -> torch.Tensor:
    """Concatenate feature maps on the channel axis, in the given order."""
    if not maps:
        raise ShapeError("fuse_concat needs at least one map")
    first = maps[0]
    for m in maps[1:]:
        if m.shape[0] != first.shape[0] or m.shape[-2:] != first.shape[-2:]:
            raise ShapeError(
                f"cannot concat {tuple(m.shape)} with {tuple(first.shape)}: "
                "batch/height/width must match"
            )
    if len(maps) == 1:
        return first
    return torch.cat(maps, dim=1)


class CBRBlock(nn.Module):
    """conv-BN-ReLU units (two by default); spatial size is preserved."""

    def __init__(self, in_channels: int, out_channels: int, units: int = 2):
        super().__init__()
        layers = []
        ch = in_channels
        for _ in range(units):
            layers += [
                nn.Conv2d(ch, out_channels, 3, stride=1, padding=1, bias=False),
                nn.BatchNorm2d(out_channels, eps=1e-5, momentum=0.1),
                nn.ReLU(inplace=True),
            ]
            ch = out_channels
        self.body = nn.Sequential(*layers)
        self.out_channels = out_channels
        for m in self.modules():
            if isinstance(m, nn.Conv2d):
                nn.init.kaiming_normal_(m.weight, mode="fan_in", nonlinearity="relu")

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.body(x)


class PRBCBlock(nn.Module):
    """CBRBlock followed by 2x2 max pooling: halves height and width."""

    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.cbr = CBRBlock(in_channels, out_channels)
        self.out_channels = out_channels

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h, w = x.shape[-2:]
        if h % 2 != 0 or w % 2 != 0:
            raise OddSizeError(f"cannot 2x2-pool odd spatial size {h}x{w}")
        return F.max_pool2d(self.cbr(x), kernel_size=2, stride=2)


class URBCBlock(nn.Module):
    """CBRBlock followed by a bilinear resize up to the given target."""

    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.cbr = CBRBlock(in_channels, out_channels)
        self.out_channels = out_channels

    def forward(self, x: torch.Tensor, target_hw: tuple[int, int]) -> torch.Tensor:
        h, w = x.shape[-2:]
        if target_hw[0] < h or target_hw[1] < w:
            raise ShapeError(
                f"upsample target {target_hw} smaller than input {h}x{w}"
            )
        return resize_bilinear(self.cbr(x), target_hw)
