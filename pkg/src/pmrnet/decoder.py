"""Parallel multi-resolution decoder, nested skip pathway and head.

The skip pathway is a triangular grid of conv nodes over the branch-0
encoder features (dense within each row, fed from below by upsampling),
exactly the nesting of UNet++. Row i's final node is the skip input
f*_i consumed by decoder branch 0.

The decoder runs one upsampling chain per branch. Each step fuses at
the step's own target resolution: the branch's coarser map and the map
of the next-coarser branch are bilinearly upsampled to the target,
branch 0 additionally takes the skip input (already at target size),
and the conv block processes the concatenation there, keeping the
full-resolution skip detail intact for the head. Branch j only needs
layers i >= j+1 -- deeper maps of coarse branches feed nothing, so they
are not computed and hold no parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn

from .blocks import CBRBlock, URBCBlock, fuse_concat, resize_bilinear
from .config import NetworkConfig, branch_channels, channels_at


class SkipPathway(nn.Module):
    def __init__(self, cfg: NetworkConfig):
        super().__init__()
        self.cfg = cfg
        L = cfg.num_layers
        self.nodes = nn.ModuleDict()
        for k in range(1, L):
            for i in range(1, L - k + 1):
                in_ch = k * channels_at(cfg, i) + channels_at(cfg, i + 1)
                self.nodes[f"s{i}_{k}"] = CBRBlock(in_ch, channels_at(cfg, i))

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    def forward(self, branch0: list[torch.Tensor]) -> dict[int, torch.Tensor]:
        """branch0 is [f_1(x_0) .. f_L(x_0)]; returns {i: f*_i} for i < L."""
        L = self.cfg.num_layers
        s = {(i, 0): branch0[i - 1] for i in range(1, L + 1)}
        for k in range(1, L):
            for i in range(1, L - k + 1):
                row = [s[(i, kk)] for kk in range(k)]
                below = resize_bilinear(s[(i + 1, k - 1)], row[0].shape[-2:])
                s[(i, k)] = self.nodes[f"s{i}_{k}"](fuse_concat(row + [below]))
        return {i: s[(i, L - i)] for i in range(1, L)}


class ParallelDecoder(nn.Module):
    def __init__(
        self,
        cfg: NetworkConfig,
        num_branches: int,
        input_channels: list[int],
        use_skips: bool = True,
    ):
        super().__init__()
        if len(input_channels) != num_branches:
            raise ValueError("need one input width per decoder branch")
        self.cfg = cfg
        self.num_branches = num_branches
        self.use_skips = use_skips
        L = cfg.num_layers

        def width(i: int, j: int) -> int:
            return input_channels[j] if i == L else branch_channels(cfg, i, j)

        self.blocks = nn.ModuleDict()
        for j in range(num_branches):
            for i in range(L - 1, j, -1):
                in_ch = width(i + 1, j)
                if j < num_branches - 1:
                    in_ch += width(i + 1, j + 1)
                if j == 0 and use_skips:
                    in_ch += channels_at(cfg, i)
                self.blocks[f"d{i}_{j}"] = URBCBlock(in_ch, branch_channels(cfg, i, j))

    def forward(
        self,
        inputs: dict[int, torch.Tensor],
        skips: dict[int, torch.Tensor] | None = None,
    ) -> dict:
        """inputs maps branch -> deepest map; returns {(layer, branch): map}."""
        L, B = self.cfg.num_layers, self.num_branches
        if self.use_skips and skips is None:
            raise ValueError("decoder built with skips but none were given")
        maps: dict = {}

        def get(i: int, j: int) -> torch.Tensor:
            return inputs[j] if i == L else maps[(i, j)]

        for i in range(L - 1, 0, -1):
            for j in range(min(i - 1, B - 1), -1, -1):
                prev = get(i + 1, j)
                target = (2 * prev.shape[-2], 2 * prev.shape[-1])
                parts = [resize_bilinear(prev, target)]
                if j < B - 1:
                    parts.append(resize_bilinear(get(i + 1, j + 1), target))
                if j == 0 and self.use_skips:
                    parts.append(resize_bilinear(skips[i], target))
                maps[(i, j)] = self.blocks[f"d{i}_{j}"](fuse_concat(parts), target)
        return maps


@dataclass
class SegmentationOutput:
    probabilities: torch.Tensor  # (batch, 1, H, W) in [0, 1]
    mask: torch.Tensor  # same shape, values {0, 1}


def segment(logits: torch.Tensor, threshold: float) -> SegmentationOutput:
    """Sigmoid probabilities plus the >=-threshold binary mask."""
    probs = torch.sigmoid(logits)
    return SegmentationOutput(probabilities=probs, mask=(probs >= threshold).to(probs.dtype))


class SegmentationHead(nn.Module):
    """1x1 convolution down to one channel of logits.

    The bias starts at -1 so fresh models predict mostly background,
    which shortens the early phase where every pixel hovers at 0.5.
    """

    def __init__(self, in_channels: int):
        super().__init__()
        self.conv = nn.Conv2d(in_channels, 1, kernel_size=1)
        nn.init.constant_(self.conv.bias, -1.0)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.conv(x)

    def predict(self, x: torch.Tensor, threshold: float) -> SegmentationOutput:
        return segment(self.forward(x), threshold)
