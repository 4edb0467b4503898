import torch
import torch.nn.functional as F

from pmrnet.config import NetworkConfig, branch_channels, channels_at
from pmrnet.context import ContextEncoder


def _fake_deepest(cfg, hw0):
    torch.manual_seed(4)
    deepest = {}
    for j in range(cfg.num_branches):
        ch = branch_channels(cfg, cfg.num_layers, j)
        deepest[j] = torch.rand(1, ch, hw0[0] // 2**j, hw0[1] // 2**j)
    return deepest


def test_context_output_shapes():
    cfg = NetworkConfig(num_layers=5, num_branches=3, base_channels=32)
    ctx = ContextEncoder(cfg)
    ctx.eval()
    with torch.no_grad():
        out = ctx(_fake_deepest(cfg, (32, 32)))
    want = channels_at(cfg, 5)
    assert tuple(out[0].shape) == (1, want, 32, 32)
    assert tuple(out[1].shape) == (1, want, 16, 16)
    assert tuple(out[2].shape) == (1, want, 8, 8)


def test_pooled_maps_are_definitional():
    cfg = NetworkConfig(num_layers=3, num_branches=3, base_channels=8)
    ctx = ContextEncoder(cfg)
    ctx.eval()
    with torch.no_grad():
        out = ctx(_fake_deepest(cfg, (8, 8)))
    assert torch.equal(out[1], F.max_pool2d(out[0], 2, 2))
    assert torch.equal(out[2], F.max_pool2d(out[1], 2, 2))


def test_single_branch_degenerates_to_plain_conv():
    cfg = NetworkConfig(num_layers=2, num_branches=1, base_channels=4, in_channels=1)
    ctx = ContextEncoder(cfg)
    ctx.eval()
    f = torch.rand(1, branch_channels(cfg, 2, 0), 4, 4)
    with torch.no_grad():
        out = ctx({0: f})
        assert list(out.keys()) == [0]
        assert torch.equal(out[0], ctx.fuse(f))


def test_pooling_preserves_constant_maps():
    const = torch.full((1, 4, 8, 8), 2.5)
    pooled = F.max_pool2d(const, 2, 2)
    assert torch.equal(pooled, torch.full((1, 4, 4, 4), 2.5))


def test_single_conv_toggle_halves_fusion_depth():
    cfg = NetworkConfig(num_layers=2, num_branches=2, base_channels=4, in_channels=1)
    deep = ContextEncoder(cfg)
    shallow = ContextEncoder(cfg, single_conv=True)
    n_convs = lambda m: sum(1 for x in m.modules() if isinstance(x, torch.nn.Conv2d))
    assert n_convs(deep) == 2 and n_convs(shallow) == 1
