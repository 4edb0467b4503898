"""Training loop, evaluation, measurement and verification harness."""

from __future__ import annotations

import copy
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .config import NetworkConfig, TrainConfig, network_config_dict
from .data import materialize
from .errors import NaNLossError
from .losses import total_loss
from .metrics import MetricsReport, aggregate, image_metrics
from .model import PMRNet, build_model
from . import metrics as _metrics  # noqa: F401  (re-exported for callers)

HISTORY_COLUMNS = ("epoch", "total", "bce", "dice", "val_acc", "val_auc", "val_iou")


@dataclass
class TrainState:
    model: PMRNet
    optimizer: torch.optim.Optimizer
    epoch: int = 0
    history: list[dict] = field(default_factory=list)
    best_iou: float = float("-inf")
    best_epoch: int = -1
    best_state: dict | None = None


@dataclass
class ModelSummary:
    parameter_count: int
    mean_ms: float
    std_ms: float
    input_hw: tuple[int, int]
    reps: int


def count_params(model: torch.nn.Module) -> int:
    """Exact count of learnable scalars."""
    return sum(p.numel() for p in model.parameters() if p.requires_grad)


def make_optimizer(model: torch.nn.Module, tc: TrainConfig) -> torch.optim.Optimizer:
    # beta1 carries the configured momentum; classic coupled L2 decay
    return torch.optim.Adam(
        model.parameters(),
        lr=tc.learning_rate,
        betas=(tc.momentum, 0.999),
        weight_decay=tc.weight_decay,
    )


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for s in range(0, n, batch_size):
        yield order[s : s + batch_size]


def train(
    model: PMRNet,
    dataset,
    tc: TrainConfig,
    val_dataset=None,
    device: str = "cpu",
    checkpoint_dir=None,
) -> TrainState:
    """Adam training with per-epoch history and best-IoU checkpointing.

    Validation metrics are computed on val_dataset when given, else on
    the training set itself. With a fixed seed the whole trajectory is
    deterministic for a given (config, data) pair.
    """
    data = materialize(dataset)
    val = materialize(val_dataset) if val_dataset is not None else data
    model = model.to(device)
    opt = make_optimizer(model, tc)
    state = TrainState(model=model, optimizer=opt)
    images = torch.from_numpy(data.images)
    masks = torch.from_numpy(data.masks)

    for epoch in range(1, tc.max_epochs + 1):
        model.train()
        rng = np.random.default_rng((tc.seed, epoch))
        sums = {"total": 0.0, "bce": 0.0, "dice": 0.0}
        seen = 0
        for batch in _batches(len(data), tc.batch_size, rng):
            x = images[batch].to(device)
            y = masks[batch].to(device)
            probs = torch.sigmoid(model(x))
            lb = total_loss(probs, y, smooth=model.cfg.smooth)
            if not torch.isfinite(lb.total):
                raise NaNLossError(
                    f"non-finite loss at epoch {epoch} after {seen} samples: "
                    f"bce={float(lb.bce.detach())!r} dice={float(lb.dice.detach())!r}"
                )
            opt.zero_grad()
            lb.total.backward()
            opt.step()
            k = len(batch)
            sums["total"] += float(lb.total.detach()) * k
            sums["bce"] += float(lb.bce.detach()) * k
            sums["dice"] += float(lb.dice.detach()) * k
            seen += k

        report = evaluate(model, val, device=device)
        row = {
            "epoch": epoch,
            "total": sums["total"] / seen,
            "bce": sums["bce"] / seen,
            "dice": sums["dice"] / seen,
            "val_acc": report.aggregates["acc"][0],
            "val_auc": report.aggregates.get("auc", (float("nan"),))[0],
            "val_iou": report.aggregates["iou"][0],
        }
        state.history.append(row)
        state.epoch = epoch
        if row["val_iou"] > state.best_iou:
            state.best_iou = row["val_iou"]
            state.best_epoch = epoch
            state.best_state = copy.deepcopy(model.state_dict())
            if checkpoint_dir is not None:
                save_checkpoint(
                    Path(checkpoint_dir) / "best.pt", model, opt, epoch, row
                )
        if checkpoint_dir is not None:
            save_checkpoint(Path(checkpoint_dir) / "last.pt", model, opt, epoch, row)
    return state


def evaluate(
    model: PMRNet,
    dataset,
    threshold: float | None = None,
    device: str = "cpu",
    batch_size: int = 8,
) -> MetricsReport:
    """Per-image metrics over a dataset, aggregated mean and std."""
    data = materialize(dataset)
    thr = model.cfg.threshold if threshold is None else threshold
    model = model.to(device)
    model.eval()
    per_image = []
    with torch.no_grad():
        for s in range(0, len(data), batch_size):
            x = torch.from_numpy(data.images[s : s + batch_size]).to(device)
            probs = torch.sigmoid(model(x)).cpu().numpy()
            for k in range(probs.shape[0]):
                gt = data.masks[s + k, 0].astype(np.uint8)
                per_image.append(
                    image_metrics(data.ids[s + k], probs[k, 0], gt, thr)
                )
    return aggregate(per_image)


def write_history_csv(history: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(",".join(HISTORY_COLUMNS) + "\n")
        for row in history:
            cells = [str(row["epoch"])] + [
                f"{row[c]:.6f}" for c in HISTORY_COLUMNS[1:]
            ]
            f.write(",".join(cells) + "\n")


def measure_inference(
    model: PMRNet,
    hw: tuple[int, int],
    reps: int = 10,
    warmup: int = 3,
    device: str = "cpu",
) -> ModelSummary:
    """Wall-clock single-image forward times after warm-up discards."""
    assert reps >= 1
    model = model.to(device)
    model.eval()
    x = torch.randn(1, model.cfg.in_channels, *hw, device=device)
    with torch.no_grad():
        for _ in range(warmup):
            model(x)
        times = []
        for _ in range(reps):
            t0 = time.perf_counter()
            model(x)
            times.append((time.perf_counter() - t0) * 1e3)
    arr = np.asarray(times)
    return ModelSummary(
        parameter_count=count_params(model),
        mean_ms=float(arr.mean()),
        std_ms=float(arr.std()),
        input_hw=tuple(hw),
        reps=reps,
    )


# ---------------------------------------------------------------------------
# gradient verification


def grad_check(
    cfg: NetworkConfig | None = None,
    num_coords: int = 200,
    step: float = 1e-6,
    seed: int = 0,
    input_hw: tuple[int, int] = (16, 16),
    batch: int = 2,
    corrupt: str | None = None,
) -> float:
    """Compare backprop against central finite differences in float64.

    Perturbs at least num_coords randomly chosen parameter coordinates
    and returns the worst error |analytic - fd| / max(1, |analytic|,
    |fd|) over them (relative for large gradients, absolute near zero,
    where fd rounding noise would otherwise dominate). `corrupt` names a
    parameter whose analytic gradient is deliberately offset, as a
    negative control for the harness itself.
    """
    cfg = cfg or NetworkConfig(
        num_layers=3, num_branches=2, base_channels=4, in_channels=1
    )
    torch.manual_seed(seed)
    model = build_model(cfg).double()
    model.train()
    rng = np.random.default_rng(seed)
    x = torch.from_numpy(
        rng.uniform(0.0, 1.0, size=(batch, cfg.in_channels, *input_hw))
    )
    y = torch.from_numpy(
        (rng.random(size=(batch, 1, *input_hw)) < 0.4).astype(np.float64)
    )

    def loss_value() -> torch.Tensor:
        probs = torch.sigmoid(model(x))
        return total_loss(probs, y, smooth=cfg.smooth).total

    loss = loss_value()
    model.zero_grad()
    loss.backward()
    params = dict(model.named_parameters())
    grads = {n: p.grad.detach().clone() for n, p in params.items()}
    if corrupt is not None:
        grads[corrupt] = grads[corrupt] + 0.1

    sizes = [(n, p.numel()) for n, p in params.items()]
    total_size = sum(s for _, s in sizes)
    chosen = rng.choice(total_size, size=min(num_coords, total_size), replace=False)
    coords = []
    offsets = np.cumsum([0] + [s for _, s in sizes])
    for flat in np.sort(chosen):
        k = int(np.searchsorted(offsets, flat, side="right") - 1)
        coords.append((sizes[k][0], int(flat - offsets[k])))
    if corrupt is not None:
        coords.extend((corrupt, i) for i in range(min(4, params[corrupt].numel())))

    worst = 0.0
    with torch.no_grad():
        for name, idx in coords:
            flat_param = params[name].view(-1)
            orig = flat_param[idx].item()
            flat_param[idx] = orig + step
            f_plus = float(loss_value())
            flat_param[idx] = orig - step
            f_minus = float(loss_value())
            flat_param[idx] = orig
            fd = (f_plus - f_minus) / (2.0 * step)
            an = float(grads[name].view(-1)[idx])
            err = abs(an - fd) / max(1.0, abs(an), abs(fd))
            worst = max(worst, err)
    return worst


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, model: PMRNet, optimizer=None, epoch=0, metrics=None) -> None:
    """Serialize model + optimizer state with a sidecar text manifest."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "model_state": model.state_dict(),
        "optimizer_state": optimizer.state_dict() if optimizer is not None else None,
        "epoch": epoch,
        "metrics": metrics,
        "network_config": network_config_dict(model.cfg),
        "arch": {
            "encoder_branches": model.encoder_branches,
            "decoder_branches": model.decoder_branches,
            "use_context": model.use_context,
            "use_skips": model.use_skips,
            "fabricate_decoder_inputs": model.fabricate_decoder_inputs,
        },
    }
    torch.save(payload, path)
    lines = [f"epoch = {epoch}"]
    for k, v in sorted(network_config_dict(model.cfg).items()):
        lines.append(f"config.{k} = {v}")
    if metrics:
        for k in sorted(metrics):
            lines.append(f"metrics.{k} = {metrics[k]}")
    Path(f"{path}.manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_checkpoint(path) -> tuple[PMRNet, dict]:
    """Rebuild the saved model; returns (model, payload)."""
    payload = torch.load(Path(path), map_location="cpu", weights_only=False)
    cfg = NetworkConfig(**payload["network_config"])
    model = PMRNet(cfg, **payload["arch"])
    model.load_state_dict(payload["model_state"])
    model.eval()
    return model, payload
