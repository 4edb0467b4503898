"""Model assembly: the full network, its degenerate forms and ablations.

With one branch the assembly degenerates to the nested-skip (UNet++
style) baseline: single-branch encoder plus the dense skip grid, whose
final full-resolution node feeds the head directly. With two or more
branches the parallel decoder column and the multi-resolution context
bottleneck come in.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .config import NetworkConfig, branch_channels, channels_at
from .context import ContextEncoder
from .decoder import ParallelDecoder, SegmentationHead, SegmentationOutput, segment
from .encoder import ParallelEncoder, make_branch_inputs
from .errors import UnknownVariantError
from .decoder import SkipPathway

# Ablation variants in table order.
VARIANT_NAMES = (
    "baseline",
    "pmr_encoder_only",
    "pmr_enc_dec",
    "pmr_decoder_only",
    "full",
)


class PMRNet(nn.Module):
    def __init__(
        self,
        cfg: NetworkConfig,
        encoder_branches: int | None = None,
        decoder_branches: int | None = None,
        use_context: bool = True,
        use_skips: bool = True,
        fabricate_decoder_inputs: bool = False,
        context_single_conv: bool = False,
    ):
        """decoder_branches=None selects the grid-head (UNet++ shaped) form.

        fabricate_decoder_inputs feeds the parallel decoder from the
        single-branch bottleneck pooled j times instead of per-branch
        deep features.
        """
        super().__init__()
        self.cfg = cfg
        self.encoder_branches = (
            cfg.num_branches if encoder_branches is None else encoder_branches
        )
        self.decoder_branches = decoder_branches
        self.use_context = use_context
        self.use_skips = use_skips
        self.fabricate_decoder_inputs = fabricate_decoder_inputs

        self.encoder = ParallelEncoder(cfg, self.encoder_branches)
        self.skips = SkipPathway(cfg) if use_skips else None
        self.context = None
        self.decoder = None

        if decoder_branches is None:
            if not use_skips:
                raise ValueError("grid-head form needs the skip pathway")
            if use_context:
                raise ValueError("grid-head form has no context bottleneck")
        else:
            L = cfg.num_layers
            if use_context:
                self.context = ContextEncoder(
                    cfg, self.encoder_branches, single_conv=context_single_conv
                )
                in_widths = [channels_at(cfg, L)] * decoder_branches
            elif fabricate_decoder_inputs:
                in_widths = [channels_at(cfg, L)] * decoder_branches
            else:
                if decoder_branches > self.encoder_branches:
                    raise ValueError(
                        "direct wiring needs decoder_branches <= encoder_branches"
                    )
                in_widths = [
                    branch_channels(cfg, L, j) for j in range(decoder_branches)
                ]
            self.decoder = ParallelDecoder(
                cfg, decoder_branches, in_widths, use_skips=use_skips
            )
        self.head = SegmentationHead(channels_at(cfg, 1))

    def forward_features(self, x: torch.Tensor) -> dict:
        """Run the network and expose every intermediate collection."""
        cfg = self.cfg
        L = cfg.num_layers
        inputs = make_branch_inputs(x, self.encoder_branches)
        pyramid = self.encoder(inputs)
        out = {"branch_inputs": inputs, "pyramid": pyramid}

        skips = None
        if self.skips is not None:
            skips = self.skips([pyramid[(i, 0)] for i in range(1, L + 1)])
            out["skips"] = skips

        if self.decoder is None:
            feat = skips[1]
        else:
            if self.use_context:
                ctx = self.context({j: pyramid[(L, j)] for j in range(self.encoder_branches)})
                out["context"] = ctx
            elif self.fabricate_decoder_inputs:
                ctx = {0: pyramid[(L, 0)]}
                for j in range(1, self.decoder_branches):
                    ctx[j] = F.max_pool2d(ctx[j - 1], kernel_size=2, stride=2)
                out["fabricated"] = ctx
            else:
                ctx = {j: pyramid[(L, j)] for j in range(self.decoder_branches)}
            dec = self.decoder(ctx, skips)
            out["decoder"] = dec
            feat = dec[(1, 0)]
        out["logits"] = self.head(feat)
        return out

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.forward_features(x)["logits"]

    def predict(self, x: torch.Tensor, threshold: float | None = None) -> SegmentationOutput:
        thr = self.cfg.threshold if threshold is None else threshold
        return segment(self.forward(x), thr)


def build_model(cfg: NetworkConfig, context_single_conv: bool = False) -> PMRNet:
    """Assemble the network for a validated config.

    num_branches == 1 yields the UNet++-shaped single-branch baseline;
    otherwise the full parallel encoder/context/decoder assembly.
    """
    if cfg.num_branches == 1:
        return PMRNet(
            cfg, encoder_branches=1, decoder_branches=None, use_context=False
        )
    return PMRNet(
        cfg,
        decoder_branches=cfg.num_branches,
        context_single_conv=context_single_conv,
    )


def build_variant(name: str, cfg: NetworkConfig | None = None) -> PMRNet:
    """Assemble one of the ablation variants, by table-row name."""
    cfg = cfg or NetworkConfig()
    B = cfg.num_branches
    if name == "baseline":
        return PMRNet(cfg, encoder_branches=1, decoder_branches=None, use_context=False)
    if name == "pmr_encoder_only":
        return PMRNet(cfg, encoder_branches=B, decoder_branches=None, use_context=False)
    if name == "pmr_enc_dec":
        return PMRNet(cfg, encoder_branches=B, decoder_branches=B, use_context=False)
    if name == "pmr_decoder_only":
        return PMRNet(
            cfg,
            encoder_branches=1,
            decoder_branches=B,
            use_context=False,
            fabricate_decoder_inputs=True,
        )
    if name == "full":
        return PMRNet(cfg, encoder_branches=B, decoder_branches=B, use_context=True)
    raise UnknownVariantError(f"unknown variant {name!r}; choose from {VARIANT_NAMES}")
