"""Parallel multi-resolution encoder.

Branch j consumes the input downsampled by 2^j. Layer 1 is a pool-free
stem per branch; every later layer halves resolution. At each transition
a branch (except the coarsest) fuses its own map with the x2-upsampled
map of the next-coarser branch before the conv/pool block, so global
context flows toward the full-resolution branch at every depth.

The resulting pyramid maps (layer i, branch j) -> feature map with
spatial size input / 2^(i-1+j) and branch_channels(cfg, i, j) channels.
"""

from __future__ import annotations

import torch
import torch.nn as nn

from .blocks import CBRBlock, PRBCBlock, fuse_concat, resize_bilinear
from .config import NetworkConfig, branch_channels
from .errors import DivisibilityError

# (layer, branch) -> tensor, layers 1-indexed, branches 0-indexed
FeaturePyramid = dict


def make_branch_inputs(x: torch.Tensor, num_branches: int) -> list[torch.Tensor]:
    """Build [x_0 .. x_{B-1}] with x_j the input downsampled by 2^j."""
    h, w = x.shape[-2:]
    div = 2 ** (num_branches - 1)
    if h % div != 0 or w % div != 0:
        raise DivisibilityError(
            f"input {h}x{w} not divisible by {div} for {num_branches} branches"
        )
    return [resize_bilinear(x, (h // 2**j, w // 2**j)) for j in range(num_branches)]


class ParallelEncoder(nn.Module):
    def __init__(self, cfg: NetworkConfig, num_branches: int | None = None):
        super().__init__()
        self.cfg = cfg
        self.num_branches = cfg.num_branches if num_branches is None else num_branches
        self.num_layers = cfg.num_layers
        B, L = self.num_branches, self.num_layers

        self.stems = nn.ModuleList(
            CBRBlock(cfg.in_channels, branch_channels(cfg, 1, j)) for j in range(B)
        )
        # transitions[i-1][j] maps layer i -> i+1 on branch j
        self.transitions = nn.ModuleList()
        for i in range(1, L):
            row = nn.ModuleList()
            for j in range(B):
                in_ch = branch_channels(cfg, i, j)
                if j < B - 1:
                    in_ch += branch_channels(cfg, i, j + 1)
                row.append(PRBCBlock(in_ch, branch_channels(cfg, i + 1, j)))
            self.transitions.append(row)

    def forward(self, inputs: list[torch.Tensor]) -> FeaturePyramid:
        if len(inputs) != self.num_branches:
            raise DivisibilityError(
                f"expected {self.num_branches} branch inputs, got {len(inputs)}"
            )
        B, L = self.num_branches, self.num_layers
        feats: FeaturePyramid = {}
        for j in range(B):
            feats[(1, j)] = self.stems[j](inputs[j])
        for i in range(1, L):
            for j in range(B):
                if j < B - 1:
                    coarse = resize_bilinear(feats[(i, j + 1)], feats[(i, j)].shape[-2:])
                    x = fuse_concat([feats[(i, j)], coarse])
                else:
                    x = feats[(i, j)]
                feats[(i + 1, j)] = self.transitions[i - 1][j](x)
        return feats


def pyramid_shape_errors(
    cfg: NetworkConfig, input_hw: tuple[int, int], pyramid: FeaturePyramid
) -> list[str]:
    """Compare a pyramid against its closed-form shape plan; [] if exact."""
    problems = []
    h, w = input_hw
    for (i, j), t in pyramid.items():
        scale = 2 ** (i - 1 + j)
        want = (branch_channels(cfg, i, j), h // scale, w // scale)
        got = tuple(t.shape[-3:])
        if got != want:
            problems.append(f"entry ({i},{j}): expected {want}, got {got}")
    return problems
