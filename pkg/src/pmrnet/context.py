"""Multi-resolution context encoder (the bottleneck).

Fuses the deepest feature maps of all branches at branch-0 resolution
with a conv block, then re-emits one context map per branch by repeated
2x2 max pooling of the fused map. All outputs share the branch-0 deep
channel width.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .blocks import CBRBlock, fuse_concat, resize_bilinear
from .config import NetworkConfig, branch_channels, channels_at


class ContextEncoder(nn.Module):
    def __init__(
        self,
        cfg: NetworkConfig,
        num_branches: int | None = None,
        single_conv: bool = False,
    ):
        super().__init__()
        self.cfg = cfg
        self.num_branches = cfg.num_branches if num_branches is None else num_branches
        L = cfg.num_layers
        in_ch = sum(branch_channels(cfg, L, j) for j in range(self.num_branches))
        self.fuse = CBRBlock(in_ch, channels_at(cfg, L), units=1 if single_conv else 2)

    def forward(self, deepest: dict[int, torch.Tensor]) -> dict[int, torch.Tensor]:
        B = self.num_branches
        base_hw = deepest[0].shape[-2:]
        # coarsest first, branch 0 last
        parts = [resize_bilinear(deepest[j], base_hw) for j in range(B - 1, 0, -1)]
        parts.append(deepest[0])
        out = {0: self.fuse(fuse_concat(parts))}
        for j in range(1, B):
            out[j] = F.max_pool2d(out[j - 1], kernel_size=2, stride=2)
        return out
