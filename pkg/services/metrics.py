# metrics.py - IoU, nIoU, Pd and Fa with connected-component target matching

import csv
import logging
import os
from typing import List, Sequence, Tuple, Union

import numpy as np
from skimage import measure

from models.metric_report import MetricReport, SampleStats
from models.scene import SceneDataset
from services import autodiff as ad
from services.errors import ConfigurationError, DimensionError

logger = logging.getLogger(__name__)

DEFAULT_MATCH_DIST = 3.0
REPORT_NAME = "metrics.csv"
SAMPLES_NAME = "metrics_per_sample.csv"
CONNECTIVITY = {4: 1, 8: 2}

Masks = Union[np.ndarray, Sequence[np.ndarray]]


def binarize(logits, threshold: float = 0.5) -> np.ndarray:
    """sigmoid(logits) > threshold"""
    if not 0.0 < threshold < 1.0:
        raise ConfigurationError(f"threshold must lie in (0, 1), got {threshold}")
    with ad.no_grad():
        return ad.sigmoid(logits).data > threshold


def connected_components(mask: np.ndarray, connectivity: int = 8) -> Tuple[np.ndarray, int]:
    """Label foreground regions; returns (labels, count) with labels 1..count"""
    if connectivity not in CONNECTIVITY:
        raise ConfigurationError(f"connectivity must be 4 or 8, got {connectivity}")
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise DimensionError(f"connected_components expects an H×W mask, got {mask.shape}")
    labels, count = measure.label(mask > 0, connectivity=CONNECTIVITY[connectivity], background=0,
                                  return_num=True)
    return labels, int(count)


def _as_mask_stack(masks: Masks, label: str) -> np.ndarray:
    stack = np.asarray(masks)
    if stack.ndim == 4 and stack.shape[1] == 1:
        stack = stack[:, 0]
    elif stack.ndim == 2:
        stack = stack[None]
    if stack.ndim != 3:
        raise DimensionError(f"{label} masks must be N×H×W (or N×1×H×W), got {stack.shape}")
    return stack > 0


def _paired(pred_masks: Masks, gt_masks: Masks) -> Tuple[np.ndarray, np.ndarray]:
    pred = _as_mask_stack(pred_masks, "predicted")
    gt = _as_mask_stack(gt_masks, "ground-truth")
    if pred.shape != gt.shape:
        raise DimensionError(f"predicted masks {pred.shape} and ground truth {gt.shape} differ")
    if pred.shape[0] == 0:
        raise ConfigurationError("No masks to score")
    return pred, gt


def _centroids(labels: np.ndarray) -> List[Tuple[float, float]]:
    return [tuple(region.centroid) for region in measure.regionprops(labels)]


def match_targets(gt_centroids: Sequence[Tuple[float, float]], pred_centroids: Sequence[Tuple[float, float]],
                  match_dist: float = DEFAULT_MATCH_DIST) -> List[Tuple[int, int]]:
    """One-to-one greedy matching: closest (gt, pred) pairs first, ties by index"""
    candidates = []
    for g, (gr, gc) in enumerate(gt_centroids):
        for p, (pr, pc) in enumerate(pred_centroids):
            dist = float(np.hypot(gr - pr, gc - pc))
            if dist <= match_dist:
                candidates.append((dist, g, p))
    candidates.sort()
    used_gt, used_pred, pairs = set(), set(), []
    for _, g, p in candidates:
        if g in used_gt or p in used_pred:
            continue
        used_gt.add(g)
        used_pred.add(p)
        pairs.append((g, p))
    return pairs


def sample_stats(pred: np.ndarray, gt: np.ndarray, match_dist: float = DEFAULT_MATCH_DIST) -> SampleStats:
    pred, gt = np.asarray(pred) > 0, np.asarray(gt) > 0
    gt_labels, n_gt = connected_components(gt)
    pred_labels, _ = connected_components(pred)
    pairs = match_targets(_centroids(gt_labels), _centroids(pred_labels), match_dist)
    matched_pred_labels = [p + 1 for _, p in pairs]
    false_pixels = int(np.count_nonzero(pred & ~np.isin(pred_labels, matched_pred_labels)))
    return SampleStats(
        tp=int(np.count_nonzero(pred & gt)),
        gt_pixels=int(np.count_nonzero(gt)),
        pred_pixels=int(np.count_nonzero(pred)),
        gt_targets=n_gt,
        matched_targets=len(pairs),
        false_pixels=false_pixels,
        total_pixels=int(gt.size),
    )


def iou(pred_masks: Masks, gt_masks: Masks) -> float:
    """Pooled ΣTP / (ΣT + ΣP - ΣTP); 1.0 when both sets are empty"""
    pred, gt = _paired(pred_masks, gt_masks)
    tp = int(np.count_nonzero(pred & gt))
    union = int(np.count_nonzero(pred)) + int(np.count_nonzero(gt)) - tp
    return 1.0 if union == 0 else tp / union


def niou(pred_masks: Masks, gt_masks: Masks) -> float:
    """Mean per-sample IoU; empty-vs-empty samples count as 1"""
    pred, gt = _paired(pred_masks, gt_masks)
    scores = []
    for p, g in zip(pred, gt):
        tp = int(np.count_nonzero(p & g))
        union = int(np.count_nonzero(p)) + int(np.count_nonzero(g)) - tp
        scores.append(1.0 if union == 0 else tp / union)
    return float(np.mean(scores))


def _pd_fa(stats: Sequence[SampleStats]) -> Tuple[float, float, bool]:
    total_targets = sum(s.gt_targets for s in stats)
    no_targets = total_targets == 0
    pd = 1.0 if no_targets else sum(s.matched_targets for s in stats) / total_targets
    fa = sum(s.false_pixels for s in stats) / sum(s.total_pixels for s in stats)
    return pd, fa, no_targets


def pd_fa(pred_masks: Masks, gt_masks: Masks, match_dist: float = DEFAULT_MATCH_DIST) -> Tuple[float, float]:
    """
    Pd = matched GT targets / GT targets; Fa = pixels of unmatched
    predicted components / all pixels. Pd is 1.0 when there are no targets.
    """
    pred, gt = _paired(pred_masks, gt_masks)
    pd, fa, no_targets = _pd_fa([sample_stats(p, g, match_dist) for p, g in zip(pred, gt)])
    if no_targets:
        logger.warning("⚠️ No ground-truth targets in the evaluated set; Pd reported as 1.0")
    return pd, fa


def evaluate_masks(pred_masks: Masks, gt_masks: Masks, match_dist: float = DEFAULT_MATCH_DIST) -> MetricReport:
    pred, gt = _paired(pred_masks, gt_masks)
    stats = [sample_stats(p, g, match_dist) for p, g in zip(pred, gt)]
    tp = sum(s.tp for s in stats)
    union = sum(s.gt_pixels + s.pred_pixels - s.tp for s in stats)
    pd, fa, no_targets = _pd_fa(stats)
    if no_targets:
        logger.warning("⚠️ No ground-truth targets in the evaluated set; Pd reported as 1.0")
    return MetricReport(
        iou=1.0 if union == 0 else tp / union,
        niou=float(np.mean([s.iou for s in stats])),
        pd=pd,
        fa=fa,
        per_sample=stats,
        n_samples=len(stats),
        no_targets=no_targets,
    )


def evaluate(model, dataset: SceneDataset, threshold: float = 0.5,
             match_dist: float = DEFAULT_MATCH_DIST, batch_size: int = 8) -> MetricReport:
    """Run the model's main head on every scene and score the binarized output"""
    from services.trainer import predict

    if len(dataset) == 0:
        raise ConfigurationError("Cannot evaluate an empty dataset")
    if not 0.0 < threshold < 1.0:
        raise ConfigurationError(f"threshold must lie in (0, 1), got {threshold}")
    images, masks, _ = dataset.arrays()
    probs = predict(model, images, batch_size=batch_size)["main"]
    report = evaluate_masks(probs > threshold, masks, match_dist)
    logger.info(f"📊 IoU {report.iou:.4f} nIoU {report.niou:.4f} Pd {report.pd:.4f} "
                f"Fa {report.fa * 1e6:.2f}e-6 over {report.n_samples} scenes")
    return report


def format_report_table(report: MetricReport) -> str:
    """Human-readable summary; Fa shown in units of 1e-6"""
    lines = [
        f"{'IoU':>8} {'nIoU':>8} {'Pd':>8} {'Fa(e-6)':>10} {'scenes':>7}",
        f"{report.iou:8.4f} {report.niou:8.4f} {report.pd:8.4f} {report.fa * 1e6:10.2f} {report.n_samples:7d}",
    ]
    if report.no_targets:
        lines.append("note: no ground-truth targets, Pd fixed at 1.0")
    return "\n".join(lines)


def write_report_csv(report: MetricReport, out_dir: str, ids: Sequence[str] = None) -> str:
    """Summary row to metrics.csv and per-scene counts to metrics_per_sample.csv"""
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, REPORT_NAME)
    row = report.to_row()
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=list(row), lineterminator="\n")
        writer.writeheader()
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})

    ids = list(ids) if ids is not None else [f"{i:06d}" for i in range(report.n_samples)]
    with open(os.path.join(out_dir, SAMPLES_NAME), "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(("id", "tp", "gt_pixels", "pred_pixels", "gt_targets", "matched_targets",
                         "false_pixels", "iou"))
        for sample_id, s in zip(ids, report.per_sample):
            writer.writerow((sample_id, s.tp, s.gt_pixels, s.pred_pixels, s.gt_targets,
                             s.matched_targets, s.false_pixels, repr(s.iou)))
    return path
