"""Command-line surface: train, eval, summary, ablate, synth.

Exit codes: 0 success, 2 usage/configuration error, 3 runtime error.
The compute device comes from the PMRNET_DEVICE environment variable
(default cpu). Every command writes a manifest.json into its output
directory and never writes outside it.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import random
import sys
import time
from pathlib import Path

import numpy as np
import torch

from . import data as data_mod
from .config import (
    NetworkConfig,
    TrainConfig,
    config_hash,
    load_config,
    validate_config,
)
from .engine import (
    count_params,
    evaluate,
    load_checkpoint,
    measure_inference,
    save_checkpoint,
    train,
    write_history_csv,
)
from .errors import ConfigError, DivisibilityError, PMRNetError, RangeError
from .metrics import format_mean_std
from .model import VARIANT_NAMES, build_model, build_variant


def seed_everything(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed % 2**32)
    torch.manual_seed(seed)


def device_from_env() -> str:
    return os.environ.get("PMRNET_DEVICE", "cpu")


def _write_manifest(out_dir: Path, command: str, args_dict: dict, started: float) -> None:
    manifest = {
        "command": command,
        "args": args_dict,
        "started": started,
        "finished": time.time(),
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def _parse_size(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    if len(parts) == 1:
        n = int(parts[0])
        return n, n
    if len(parts) == 2:
        return int(parts[0]), int(parts[1])
    raise argparse.ArgumentTypeError(f"bad size {text!r}, expected H or HxW")


def _parse_pairs(text: str) -> list[tuple[int, int]]:
    pairs = []
    for item in text.split(","):
        l_str, _, b_str = item.partition(":")
        if not b_str:
            raise argparse.ArgumentTypeError(f"bad pair {item!r}, expected L:B")
        pairs.append((int(l_str), int(b_str)))
    return pairs


def _load_configs(args) -> tuple[NetworkConfig, TrainConfig]:
    if getattr(args, "config", None):
        cfg, tc = load_config(args.config)
    else:
        cfg, tc = NetworkConfig(), TrainConfig()
    if getattr(args, "seed", None) is not None:
        tc = dataclasses.replace(tc, seed=args.seed)
    return cfg, tc


def _prepare_data(root, cfg: NetworkConfig):
    """Load a folder dataset and resize everything to the first image's size."""
    ds = data_mod.load_dataset(root)
    if len(ds) == 0:
        raise ConfigError(f"dataset at {root} is empty")
    first_img, _, _ = ds.get(0)
    hw = first_img.shape[-2:]
    validate_config(cfg, hw)
    return data_mod.resize_dataset(ds, hw), hw


def _carve_val(train_ds):
    """Hold out ~10% of the training ids for checkpoint selection."""
    n_val = len(train_ds) // 10
    if n_val < 1:
        return train_ds, None
    val = train_ds.subset(list(train_ds.ids[-n_val:]))
    fit = train_ds.subset(list(train_ds.ids[:-n_val]))
    return fit, val


def _plot_history(history: list[dict], path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    epochs = [row["epoch"] for row in history]
    fig, ax = plt.subplots(figsize=(7, 4))
    for key in ("total", "bce", "dice"):
        ax.plot(epochs, [row[key] for row in history], label=key)
    ax.plot(epochs, [row["val_iou"] for row in history], "--", label="val_iou")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss / IoU")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def _to_rgb_u8(arr: np.ndarray) -> np.ndarray:
    """(C,H,W) float in [0,1] -> (H,W,3) uint8."""
    a = np.clip(arr, 0.0, 1.0)
    if a.shape[0] == 1:
        a = np.repeat(a, 3, axis=0)
    return np.round(a.transpose(1, 2, 0) * 255.0).astype(np.uint8)


def _save_overlay(path: Path, image, gt, pred) -> None:
    from PIL import Image

    h = image.shape[-2]
    sep = np.full((h, 2, 3), 255, dtype=np.uint8)
    panel = np.concatenate(
        [_to_rgb_u8(image), sep, _to_rgb_u8(gt), sep, _to_rgb_u8(pred)], axis=1
    )
    Image.fromarray(panel).save(path)


# ---------------------------------------------------------------------------
# commands


def cmd_train(args) -> int:
    started = time.time()
    cfg, tc = _load_configs(args)
    out_dir = Path(args.out)
    device = device_from_env()
    seed_everything(tc.seed)

    ds, hw = _prepare_data(args.data, cfg)
    spl = data_mod.split(ds, ratio=0.8, seed=tc.seed)
    train_ds, val_ds = _carve_val(ds.subset(list(spl.train_ids)))
    train_aug = data_mod.augment_dataset(train_ds, seed=tc.seed)

    if args.variant:
        model = build_variant(args.variant, cfg)
    else:
        model = build_model(cfg)
    state = train(
        model,
        train_aug,
        tc,
        val_dataset=val_ds,
        device=device,
        checkpoint_dir=out_dir / "checkpoints",
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    write_history_csv(state.history, out_dir / "history.csv")
    _plot_history(state.history, out_dir / "loss_curve.png")
    data_mod.save_ids(out_dir / "train_ids.txt", spl.train_ids)
    data_mod.save_ids(out_dir / "test_ids.txt", spl.test_ids)
    if tc.max_epochs == 0:
        save_checkpoint(out_dir / "checkpoints" / "last.pt", model, state.optimizer, 0, {})
    _write_manifest(
        out_dir,
        "train",
        {
            "config": str(args.config) if args.config else None,
            "config_hash": config_hash(cfg, tc),
            "data": str(args.data),
            "out": str(args.out),
            "seed": tc.seed,
            "variant": args.variant,
            "input_hw": list(hw),
        },
        started,
    )
    last = state.history[-1] if state.history else {}
    print(
        f"trained {tc.max_epochs} epochs; best val iou "
        f"{state.best_iou:.3f} at epoch {state.best_epoch}"
        + (f"; final loss {last.get('total', float('nan')):.4f}" if last else "")
    )
    return 0


def cmd_eval(args) -> int:
    started = time.time()
    ckpt = Path(args.checkpoint)
    if not ckpt.is_file():
        raise ConfigError(f"checkpoint {ckpt} does not exist")
    out_dir = Path(args.out)
    device = device_from_env()
    model, payload = load_checkpoint(ckpt)
    cfg = model.cfg
    seed = args.seed if args.seed is not None else payload.get("seed", 0)

    ds, hw = _prepare_data(args.data, cfg)
    spl = data_mod.split(ds, ratio=0.8, seed=seed)
    test_ds = ds.subset(list(spl.test_ids))
    if args.augment_test == "on":
        test_ds = data_mod.augment_dataset(test_ds, seed=seed)

    report = evaluate(model, test_ds, device=device)
    out_dir.mkdir(parents=True, exist_ok=True)
    report.save_csv(out_dir / "metrics.csv")

    overlay_dir = out_dir / "overlays"
    overlay_dir.mkdir(exist_ok=True)
    model.eval()
    with torch.no_grad():
        for i in range(len(test_ds)):
            img, mask, stem = test_ds.get(i)
            probs = torch.sigmoid(model(torch.from_numpy(img[None]).to(device)))
            pred = (probs[0].cpu().numpy() >= cfg.threshold).astype(np.float32)
            _save_overlay(overlay_dir / f"{stem}.png", img, mask, pred)

    _write_manifest(
        out_dir,
        "eval",
        {
            "checkpoint": str(ckpt),
            "data": str(args.data),
            "out": str(args.out),
            "seed": seed,
            "augment_test": args.augment_test,
            "input_hw": list(hw),
        },
        started,
    )
    for name in ("acc", "auc", "iou"):
        if name in report.aggregates:
            print(f"{name} {format_mean_std(*report.aggregates[name])}")
    if report.auc_excluded:
        print(f"auc excluded on {report.auc_excluded} single-class images")
    return 0


def cmd_summary(args) -> int:
    started = time.time()
    cfg, _ = _load_configs(args)
    out_dir = Path(args.out)
    rows = []
    for L, B in args.pairs:
        pair_cfg = dataclasses.replace(cfg, num_layers=L, num_branches=B)
        seed_everything(args.seed if args.seed is not None else 0)
        model = build_model(pair_cfg)
        side = max(64, pair_cfg.required_divisor)
        summary = measure_inference(model, (side, side), reps=args.reps, warmup=2)
        rows.append((L, B, summary))
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "summary.csv", "w", encoding="utf-8") as f:
        f.write("layers,branches,parameters,parameters_m,input,inference_ms_mean,inference_ms_std\n")
        for L, B, s in rows:
            f.write(
                f"{L},{B},{s.parameter_count},{s.parameter_count / 1e6:.2f},"
                f"{s.input_hw[0]}x{s.input_hw[1]},{s.mean_ms:.2f},{s.std_ms:.2f}\n"
            )
    _write_manifest(
        out_dir,
        "summary",
        {"pairs": [list(p) for p in args.pairs], "out": str(args.out), "reps": args.reps},
        started,
    )
    print(f"{'layers':>6} {'branches':>8} {'params/M':>9} {'time/ms':>8}")
    for L, B, s in rows:
        print(
            f"{L:>6} {B:>8} {s.parameter_count / 1e6:>9.2f} {s.mean_ms:>8.2f}"
        )
    return 0


def cmd_ablate(args) -> int:
    started = time.time()
    cfg, tc = _load_configs(args)
    out_dir = Path(args.out)
    device = device_from_env()

    ds, hw = _prepare_data(args.data, cfg)
    spl = data_mod.split(ds, ratio=0.8, seed=tc.seed)
    train_ds, val_ds = _carve_val(ds.subset(list(spl.train_ids)))
    test_ds = ds.subset(list(spl.test_ids))
    train_aug = data_mod.augment_dataset(train_ds, seed=tc.seed)
    if args.augment_test == "on":
        test_ds = data_mod.augment_dataset(test_ds, seed=tc.seed)

    results = []
    for name in VARIANT_NAMES:
        seed_everything(tc.seed)
        model = build_variant(name, cfg)
        train(model, train_aug, tc, val_dataset=val_ds, device=device)
        report = evaluate(model, test_ds, device=device)
        iou_mean, iou_std = report.aggregates["iou"]
        results.append((name, iou_mean, iou_std))
        print(f"{name:<18} iou {format_mean_std(iou_mean, iou_std)}")

    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "ablation.csv", "w", encoding="utf-8") as f:
        f.write("variant,iou_mean,iou_std\n")
        for name, m, s in results:
            f.write(f"{name},{m:.6f},{s:.6f}\n")
    _write_manifest(
        out_dir,
        "ablate",
        {
            "config": str(args.config) if args.config else None,
            "config_hash": config_hash(cfg, tc),
            "data": str(args.data),
            "out": str(args.out),
            "seed": tc.seed,
            "input_hw": list(hw),
        },
        started,
    )
    return 0


def cmd_synth(args) -> int:
    started = time.time()
    out_dir = Path(args.out)
    ds = data_mod.synth_dataset(args.count, args.size, args.seed or 0)
    data_mod.write_dataset(ds, out_dir)
    _write_manifest(
        out_dir,
        "synth",
        {
            "count": args.count,
            "size": list(args.size),
            "seed": args.seed or 0,
            "out": str(args.out),
        },
        started,
    )
    print(f"wrote {len(ds)} image/mask pairs to {out_dir}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pmrnet",
        description="Parallel multi-resolution segmentation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, config=False, data=False, out=True, seed=True):
        if config:
            p.add_argument("--config", help="flat key=value configuration file")
        if data:
            p.add_argument("--data", required=True, help="dataset root directory")
        if out:
            p.add_argument("--out", required=True, help="output directory")
        if seed:
            p.add_argument("--seed", type=int, default=None)

    p_train = sub.add_parser("train", help="train a model and write history/checkpoints")
    common(p_train, config=True, data=True)
    p_train.add_argument("--variant", choices=VARIANT_NAMES, default=None)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on the test split")
    common(p_eval, data=True)
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--augment-test", choices=("on", "off"), default="off")
    p_eval.set_defaults(func=cmd_eval)

    p_sum = sub.add_parser("summary", help="parameter/latency table over (L,B) pairs")
    common(p_sum, config=True)
    p_sum.add_argument("--pairs", type=_parse_pairs, required=True, help="e.g. 5:1,5:2,5:3")
    p_sum.add_argument("--reps", type=int, default=5)
    p_sum.set_defaults(func=cmd_summary)

    p_abl = sub.add_parser("ablate", help="train and compare all ablation variants")
    common(p_abl, config=True, data=True)
    p_abl.add_argument("--augment-test", choices=("on", "off"), default="off")
    p_abl.set_defaults(func=cmd_ablate)

    p_syn = sub.add_parser("synth", help="write a synthetic shapes dataset")
    common(p_syn)
    p_syn.add_argument("--count", type=int, default=64)
    p_syn.add_argument("--size", type=_parse_size, default=(64, 64))
    p_syn.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else 2
    try:
        return args.func(args)
    except (ConfigError, RangeError, DivisibilityError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except PMRNetError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
