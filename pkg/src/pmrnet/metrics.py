"""Pixel-wise evaluation: accuracy, ROC AUC and IoU with mean/std tables.

AUC is computed on the pre-threshold probability map per image via the
rank (Mann-Whitney) statistic with tied probabilities counted half,
which equals the trapezoidal area under the ROC curve traced over tie
groups. Images whose ground truth contains a single class have no
defined AUC and are excluded from the AUC aggregate (with a count kept).
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateError, EmptyError, NonBinaryError, ShapeError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def _as_binary(a, name: str) -> np.ndarray:
    arr = np.asarray(a)
    if not np.isin(arr, (0, 1)).all():
        raise NonBinaryError(f"{name} contains values other than 0 and 1")
    return arr.astype(bool)


def confusion(pred_mask, gt) -> ConfusionCounts:
    p = _as_binary(pred_mask, "pred_mask")
    g = _as_binary(gt, "gt")
    if p.shape != g.shape:
        raise ShapeError(f"pred {p.shape} vs gt {g.shape}")
    return ConfusionCounts(
        tp=int((p & g).sum()),
        tn=int((~p & ~g).sum()),
        fp=int((p & ~g).sum()),
        fn=int((~p & g).sum()),
    )


def accuracy(c: ConfusionCounts) -> float:
    if c.total == 0:
        raise EmptyError("accuracy of an empty image")
    return (c.tp + c.tn) / c.total


def iou(c: ConfusionCounts) -> float:
    """tp / (tp+fp+fn); 1.0 by convention when pred and gt are both empty."""
    den = c.tp + c.fp + c.fn
    if den == 0:
        return 1.0
    return c.tp / den


def roc_auc(probs, gt) -> float:
    p = np.asarray(probs, dtype=np.float64).ravel()
    g = _as_binary(gt, "gt").ravel()
    if p.shape != g.shape:
        raise ShapeError(f"probs {p.shape} vs gt {g.shape}")
    n_pos = int(g.sum())
    n_neg = g.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateError("AUC undefined for single-class ground truth")
    order = np.argsort(p, kind="mergesort")
    sorted_p = p[order]
    # average rank (1-based) within each tie group
    ranks = np.empty(p.size, dtype=np.float64)
    i = 0
    while i < p.size:
        j = i
        while j + 1 < p.size and sorted_p[j + 1] == sorted_p[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    pos_rank_sum = ranks[g].sum()
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


@dataclass
class ImageMetrics:
    image_id: str
    acc: float
    auc: float | None  # None when the ground truth is single-class
    iou: float
    iou_degenerate: bool = False  # empty-vs-empty convention fired


@dataclass
class MetricsReport:
    per_image: list[ImageMetrics]
    aggregates: dict = field(default_factory=dict)  # metric -> (mean, std)
    auc_excluded: int = 0
    iou_degenerate: int = 0

    def summary(self) -> str:
        parts = [
            f"{name} {format_mean_std(*self.aggregates[name])}"
            for name in ("acc", "auc", "iou")
            if name in self.aggregates
        ]
        if self.auc_excluded:
            parts.append(f"(auc excluded on {self.auc_excluded} single-class images)")
        return "  ".join(parts)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("image,acc,auc,iou\n")
        for m in self.per_image:
            auc_txt = "" if m.auc is None else f"{m.auc:.3f}"
            buf.write(f"{m.image_id},{m.acc:.3f},{auc_txt},{m.iou:.3f}\n")
        for row, idx in (("MEAN", 0), ("STD", 1)):
            cells = [row]
            for name in ("acc", "auc", "iou"):
                if name in self.aggregates:
                    cells.append(f"{self.aggregates[name][idx]:.3f}")
                else:
                    cells.append("")
            buf.write(",".join(cells) + "\n")
        return buf.getvalue()

    def save_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.to_csv())


def format_mean_std(mean: float, std: float) -> str:
    return f"{mean:.3f}±{std:.3f}"


def aggregate(per_image: list[ImageMetrics]) -> MetricsReport:
    """Arithmetic mean and population standard deviation per metric."""
    if not per_image:
        raise EmptyError("cannot aggregate an empty metric list")
    report = MetricsReport(per_image=list(per_image))
    for name in ("acc", "auc", "iou"):
        vals = [getattr(m, name) for m in per_image if getattr(m, name) is not None]
        if vals:
            arr = np.asarray(vals, dtype=np.float64)
            report.aggregates[name] = (float(arr.mean()), float(arr.std()))
    report.auc_excluded = sum(1 for m in per_image if m.auc is None)
    report.iou_degenerate = sum(1 for m in per_image if m.iou_degenerate)
    return report


def image_metrics(image_id: str, probs, gt, threshold: float) -> ImageMetrics:
    """All per-image metrics from one probability map and its ground truth."""
    p = np.asarray(probs, dtype=np.float64)
    g = np.asarray(gt)
    mask = (p >= threshold).astype(np.uint8)
    c = confusion(mask, g)
    try:
        auc: float | None = roc_auc(p, g)
    except DegenerateError:
        auc = None
    return ImageMetrics(
        image_id=image_id,
        acc=accuracy(c),
        auc=auc,
        iou=iou(c),
        iou_degenerate=(c.tp + c.fp + c.fn) == 0,
    )
