import numpy as np
import pytest

from conftest import auc_bruteforce
from pmrnet.errors import (
    DegenerateError,
    EmptyError,
    NonBinaryError,
    ShapeError,
)
from pmrnet.metrics import (
    ConfusionCounts,
    MetricsReport,
    accuracy,
    aggregate,
    confusion,
    format_mean_std,
    image_metrics,
    iou,
    roc_auc,
)


def test_confusion_hand_examples():
    gt = np.array([1, 0, 1, 0])
    assert confusion(gt, gt) == ConfusionCounts(tp=2, tn=2, fp=0, fn=0)
    assert confusion(1 - gt, gt) == ConfusionCounts(tp=0, tn=0, fp=2, fn=2)
    c = confusion(np.array([1, 1, 0, 0]), gt)
    assert (c.tp, c.fp, c.fn, c.tn) == (1, 1, 1, 1)


def test_confusion_rejects_bad_inputs():
    with pytest.raises(NonBinaryError):
        confusion(np.array([0.5, 1.0]), np.array([0, 1]))
    with pytest.raises(ShapeError):
        confusion(np.array([0, 1]), np.array([0, 1, 0]))


def test_accuracy_examples():
    assert accuracy(ConfusionCounts(tp=2, tn=6, fp=1, fn=1)) == pytest.approx(0.8)
    gt = np.array([1, 0, 1, 1])
    assert accuracy(confusion(gt, gt)) == 1.0
    assert accuracy(confusion(1 - gt, gt)) == 0.0
    with pytest.raises(EmptyError):
        accuracy(ConfusionCounts(0, 0, 0, 0))


def test_iou_examples():
    gt = np.array([1, 1, 0, 0])
    assert iou(confusion(gt, gt)) == 1.0
    assert iou(confusion(np.array([0, 0, 1, 1]), gt)) == 0.0
    assert iou(ConfusionCounts(tp=2, tn=0, fp=1, fn=1)) == pytest.approx(0.5)
    # empty-vs-empty falls back to 1.0 by convention
    assert iou(confusion(np.zeros(4, int), np.zeros(4, int))) == 1.0


def test_roc_auc_frozen_examples():
    assert roc_auc([0.9, 0.4, 0.6, 0.1], [1, 0, 1, 0]) == pytest.approx(1.0)
    assert roc_auc([0.9, 0.6, 0.4, 0.1], [1, 0, 1, 0]) == pytest.approx(0.75)
    assert roc_auc([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0]) == pytest.approx(0.5)


def test_roc_auc_single_class_degenerate():
    with pytest.raises(DegenerateError):
        roc_auc([0.1, 0.9], [1, 1])
    with pytest.raises(DegenerateError):
        roc_auc([0.1, 0.9], [0, 0])


def test_roc_auc_matches_bruteforce_with_ties():
    rng = np.random.default_rng(9)
    for trial in range(30):
        probs = rng.random((16, 16))
        if trial % 2 == 0:
            probs = np.round(probs, 1)  # force plenty of ties
        gt = (rng.random((16, 16)) < 0.4).astype(np.uint8)
        if gt.min() == gt.max():
            continue
        assert roc_auc(probs, gt) == pytest.approx(
            auc_bruteforce(probs, gt), abs=1e-12
        )


def test_roc_auc_complement_identity():
    rng = np.random.default_rng(10)
    for _ in range(10):
        probs = rng.random(64)
        gt = (rng.random(64) < 0.5).astype(np.uint8)
        if gt.min() == gt.max():
            continue
        assert roc_auc(probs, gt) + roc_auc(1.0 - probs, gt) == pytest.approx(
            1.0, abs=1e-12
        )


def test_metrics_match_definitional_loops():
    rng = np.random.default_rng(11)
    for _ in range(10):
        pred = (rng.random((8, 8)) < 0.5).astype(np.uint8)
        gt = (rng.random((8, 8)) < 0.5).astype(np.uint8)
        tp = fp = fn = tn = 0
        for y in range(8):
            for x in range(8):
                if pred[y, x] and gt[y, x]:
                    tp += 1
                elif pred[y, x]:
                    fp += 1
                elif gt[y, x]:
                    fn += 1
                else:
                    tn += 1
        c = confusion(pred, gt)
        assert (c.tp, c.fp, c.fn, c.tn) == (tp, fp, fn, tn)
        assert accuracy(c) == (tp + tn) / 64
        if tp + fp + fn:
            assert iou(c) == tp / (tp + fp + fn)


def test_aggregate_mean_and_population_std():
    from pmrnet.metrics import ImageMetrics

    one = [ImageMetrics("a", acc=0.9, auc=0.8, iou=0.7)]
    rep = aggregate(one)
    assert rep.aggregates["acc"] == (0.9, 0.0)

    two = [
        ImageMetrics("a", acc=0.8, auc=None, iou=0.8),
        ImageMetrics("b", acc=1.0, auc=0.6, iou=1.0),
    ]
    rep = aggregate(two)
    assert rep.aggregates["iou"] == (pytest.approx(0.9), pytest.approx(0.1))
    assert rep.aggregates["auc"] == (0.6, 0.0)  # single-class image excluded
    assert rep.auc_excluded == 1
    with pytest.raises(EmptyError):
        aggregate([])


def test_report_formatting_matches_table_style():
    assert format_mean_std(0.811, 0.138) == "0.811±0.138"
    from pmrnet.metrics import ImageMetrics

    rep = aggregate(
        [
            ImageMetrics("img0", acc=0.9391, auc=0.9876, iou=0.8114),
            ImageMetrics("img1", acc=0.9389, auc=None, iou=0.8106),
        ]
    )
    csv = rep.to_csv()
    lines = csv.strip().splitlines()
    assert lines[0] == "image,acc,auc,iou"
    assert lines[1] == "img0,0.939,0.988,0.811"
    assert lines[2] == "img1,0.939,,0.811"
    assert lines[3].startswith("MEAN,")
    assert lines[4].startswith("STD,")
    assert "iou 0.811±" in rep.summary()


def test_image_metrics_end_to_end():
    probs = np.array([[0.9, 0.1], [0.8, 0.2]])
    gt = np.array([[1, 0], [1, 0]], dtype=np.uint8)
    m = image_metrics("x", probs, gt, threshold=0.5)
    assert m.acc == 1.0 and m.iou == 1.0 and m.auc == 1.0
    assert not m.iou_degenerate
    blank = image_metrics("y", np.zeros((2, 2)), np.zeros((2, 2), np.uint8), 0.5)
    assert blank.auc is None and blank.iou == 1.0 and blank.iou_degenerate
