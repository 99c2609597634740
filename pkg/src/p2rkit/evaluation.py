"""Rotated-box detection evaluation: per-category AP at an IoU threshold
and the unweighted category mean (mAP).

Matching follows the classic devkit protocol: detections are visited in
descending score order and claim the unmatched same-category ground
truth with the highest rotated IoU in their image; a detection is a true
positive iff that IoU clears the threshold. Difficulty-flagged ground
truths are ignored entirely (their matches count neither as TP nor FP,
and they do not enter the recall denominator). AP uses the 11-point
interpolation by default, with the all-point area under the PR curve as
an alternative.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .geometry import RBox, rotated_iou


@dataclass(frozen=True)
class DetectionRecord:
    image_id: str
    category: str
    score: float
    box: RBox

    def __post_init__(self):
        if not np.isfinite(self.score):
            raise ValueError("detection score must be finite")


@dataclass(frozen=True)
class GtBox:
    image_id: str
    category: str
    box: RBox
    difficult: bool = False


@dataclass
class EvalResult:
    per_category: dict[str, float]
    mean_ap: float


def ap_11point(recall: np.ndarray, precision: np.ndarray) -> float:
    """VOC-07 style interpolated AP: mean over the 11 recall anchors of
    the max precision at recall >= anchor."""
    ap = 0.0
    for t in np.linspace(0.0, 1.0, 11):
        mask = recall >= t - 1e-12
        ap += precision[mask].max() if mask.any() else 0.0
    return ap / 11.0


def ap_auc(recall: np.ndarray, precision: np.ndarray) -> float:
    """Area under the precision envelope over all recall change points."""
    mrec = np.concatenate([[0.0], recall, [1.0]])
    mpre = np.concatenate([[0.0], precision, [0.0]])
    for i in range(mpre.size - 1, 0, -1):
        mpre[i - 1] = max(mpre[i - 1], mpre[i])
    idx = np.flatnonzero(mrec[1:] != mrec[:-1])
    return float(np.sum((mrec[idx + 1] - mrec[idx]) * mpre[idx + 1]))


def _category_pr(dets, gts_by_image, iou_thresh: float):
    """(recall, precision) curves for one category's detections."""
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    matched: dict[str, list[bool]] = {
        image: [False] * len(recs) for image, recs in gts_by_image.items()
    }
    npos = sum(not g.difficult for recs in gts_by_image.values() for g in recs)
    tp, fp = [], []
    for i in order:
        det = dets[i]
        recs = gts_by_image.get(det.image_id, [])
        best_iou, best_j = 0.0, -1
        for j, gt in enumerate(recs):
            if matched[det.image_id][j]:
                continue
            iou = rotated_iou(det.box, gt.box)
            if iou > best_iou:
                best_iou, best_j = iou, j
        if best_j >= 0 and best_iou >= iou_thresh:
            if recs[best_j].difficult:
                continue  # ignored: neither TP nor FP
            matched[det.image_id][best_j] = True
            tp.append(1.0)
            fp.append(0.0)
        else:
            tp.append(0.0)
            fp.append(1.0)
    if not tp:
        return np.zeros(0), np.zeros(0), npos
    tp_cum = np.cumsum(tp)
    fp_cum = np.cumsum(fp)
    recall = tp_cum / npos if npos > 0 else np.zeros_like(tp_cum)
    precision = tp_cum / np.maximum(tp_cum + fp_cum, np.finfo(float).eps)
    return recall, precision, npos


def evaluate_map(dets, gts, iou_thresh: float = 0.5,
                 interpolation: str = "11point",
                 categories=None) -> EvalResult:
    """Per-category AP and their unweighted mean.

    dets: DetectionRecord sequence; gts: GtBox sequence. Categories
    default to every category present in either input; a category with
    detections but no ground truth gets AP 0 with a warning.
    """
    if interpolation not in ("11point", "auc"):
        raise ValueError(f"unknown interpolation {interpolation!r}")
    ap_fn = ap_11point if interpolation == "11point" else ap_auc
    if categories is None:
        categories = sorted({d.category for d in dets} | {g.category for g in gts})

    per_category = {}
    for category in categories:
        cat_dets = [d for d in dets if d.category == category]
        cat_gts: dict[str, list[GtBox]] = {}
        for g in gts:
            if g.category == category:
                cat_gts.setdefault(g.image_id, []).append(g)
        if not cat_gts and cat_dets:
            warnings.warn(f"category {category!r} has detections but no ground truth")
            per_category[category] = 0.0
            continue
        recall, precision, npos = _category_pr(cat_dets, cat_gts, iou_thresh)
        if recall.size == 0 or npos == 0:
            per_category[category] = 0.0
            continue
        per_category[category] = float(ap_fn(recall, precision))
    mean = float(np.mean(list(per_category.values()))) if per_category else 0.0
    return EvalResult(per_category, mean)


def noise_ablation(gts_by_image: dict, detector, sigmas=(0.0, 0.10, 0.20),
                   seed: int = 0, iou_thresh: float = 0.5) -> dict[float, EvalResult]:
    """Annotation-noise sweep: for each noise level, derive perturbed
    point annotations from the ground-truth boxes, hand them to the
    caller's detector, and evaluate what comes back.

    gts_by_image: image_id -> list of dataset.GtRecord. detector is a
    callable (points_by_image, sigma) -> list[DetectionRecord], where
    points_by_image maps image_id -> list[dataset.PointAnnotation].
    """
    from .dataset import derive_points

    gt_boxes = [
        GtBox(image_id, rec.category, rec.box, rec.difficult)
        for image_id, recs in gts_by_image.items()
        for rec in recs
    ]
    results = {}
    for sigma in sigmas:
        rng = np.random.default_rng([seed, int(round(sigma * 1000))])
        points = {image_id: derive_points(recs, sigma, rng)
                  for image_id, recs in sorted(gts_by_image.items())}
        dets = detector(points, sigma)
        results[sigma] = evaluate_map(dets, gt_boxes, iou_thresh)
    return results


def format_table(result: EvalResult) -> str:
    """Fixed-width text table: one column per category plus the mean."""
    names = list(result.per_category)
    widths = [max(len(n), 7) for n in names]
    header = "  ".join(n.rjust(w) for n, w in zip(names, widths))
    values = "  ".join(f"{result.per_category[n]:.4f}".rjust(w)
                       for n, w in zip(names, widths))
    return (f"{header}  {'mAP'.rjust(7)}\n"
            f"{values}  {result.mean_ap:.4f}".rstrip())


def write_table_csv(path, result: EvalResult) -> None:
    """CSV layout: category columns then the mean, one header + one row."""
    names = list(result.per_category)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(names + ["mAP"]) + "\n")
        fh.write(",".join([f"{result.per_category[n]:.6f}" for n in names]
                          + [f"{result.mean_ap:.6f}"]) + "\n")
