"""Training-loop binding for the p2rkit toolkit.

A deliberately thin surface for host training frameworks: batches of
row-major 8-bit RGB buffers go in, augmented buffers and synthetic box
targets come out, plus delegated label assignment and evaluation. Every
result is bit-identical to calling the toolkit directly with the same
seed; no numerical work happens on this side of the boundary, and numpy
buffers are passed by reference (a copy only happens where the uint8 to
float conversion requires one).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

import p2rkit
from p2rkit.assignment import AnchorGrid, AssignResult, AssignTarget, assign
from p2rkit.dataset import image_to_float, image_to_uint8
from p2rkit.evaluation import DetectionRecord, EvalResult, GtBox, evaluate_map
from p2rkit.geometry import RBox
from p2rkit.synthesis import (
    SynthesisConfig,
    generate_setrc_library,
    image_rng,
    library_rng,
    synthesize,
)

__version__ = "0.1.0"

__all__ = [
    "BatchRequest",
    "synthesize_batch",
    "assign_batch",
    "evaluate_batch",
    "version",
]


def version() -> dict:
    """Versions of the bridge and the toolkit it delegates to."""
    return {"bridge": __version__, "kit": p2rkit.__version__}


@dataclass
class BatchRequest:
    """One synthesis batch.

    images: row-major (H, W, 3) uint8 RGB buffers. points: per-image
    sequences of ((x, y), label). library: pattern library shared by the
    batch; None regenerates the preset rectangle/circle set from the
    seed, matching the toolkit's CLI. Image index i is synthesized with
    the toolkit's per-image stream for (seed, i).
    """

    images: list
    points: list
    config: SynthesisConfig = field(default_factory=SynthesisConfig)
    seed: int = 0
    library: list | None = None

    def __post_init__(self):
        if len(self.images) != len(self.points):
            raise ValueError(
                f"{len(self.images)} images but {len(self.points)} point lists")
        for i, buf in enumerate(self.images):
            arr = np.asarray(buf)
            if arr.dtype != np.uint8 or arr.ndim != 3 or arr.shape[2] != 3:
                raise ValueError(
                    f"image {i}: expected a row-major (H, W, 3) uint8 buffer, "
                    f"got dtype {arr.dtype}, shape {arr.shape}")


def synthesize_batch(request: BatchRequest):
    """Overlay synthetic patterns on every buffer of the batch.

    Returns (buffers, targets): augmented uint8 buffers and, per image,
    the list of (RBox, label) ground truths of the placed patterns.
    """
    library = request.library
    if library is None:
        library = generate_setrc_library(library_rng(request.seed))
    buffers = []
    targets = []
    for index, (buf, pts) in enumerate(zip(request.images, request.points)):
        rng = image_rng(request.seed, index)
        augmented, placed = synthesize(image_to_float(buf), list(pts), library,
                                       request.config, rng)
        buffers.append(image_to_uint8(augmented))
        targets.append([(p.box, p.label) for p in placed])
    return buffers, targets


def assign_batch(image_sizes, pred_centers, pred_scores, targets, *,
                 stride: int = 16, anchor_size: int = 64,
                 anchors_per_cell: int = 5, k: int = 4) -> list[AssignResult]:
    """Delegated label assignment, one grid per image.

    image_sizes: (height, width) per image; pred_centers / pred_scores:
    per-image anchor predictions; targets: per-image AssignTarget lists
    (or raw ((x, y), label, kind[, box]) tuples).
    """
    lengths = {len(image_sizes), len(pred_centers), len(pred_scores), len(targets)}
    if len(lengths) != 1:
        raise ValueError("per-image argument lists must have equal length")
    results = []
    for size, centers, scores, tgts in zip(image_sizes, pred_centers,
                                           pred_scores, targets):
        grid = AnchorGrid(tuple(size), stride=stride, anchor_size=anchor_size,
                          anchors_per_cell=anchors_per_cell)
        results.append(assign(grid, centers, scores, [_to_target(t) for t in tgts], k))
    return results


def _to_target(item) -> AssignTarget:
    if isinstance(item, AssignTarget):
        return item
    xy, label, kind = item[0], item[1], item[2]
    if kind == "point":
        return AssignTarget.from_point(xy, label)
    return AssignTarget.from_box(_to_box(item[3]), label)


def _to_box(value) -> RBox:
    if isinstance(value, RBox):
        return value
    return RBox(*(float(v) for v in value))


def evaluate_batch(detections, ground_truths, iou_thresh: float = 0.5,
                   interpolation: str = "11point") -> EvalResult:
    """Delegated rotated-mAP evaluation.

    detections: (image_id, category, score, box) tuples; ground_truths:
    (image_id, category, box[, difficult]) tuples. Boxes may be RBox
    instances or (x, y, w, h, theta) sequences.
    """
    dets = [DetectionRecord(str(i), str(c), float(s), _to_box(b))
            for i, c, s, b in detections]
    gts = [GtBox(str(item[0]), str(item[1]), _to_box(item[2]),
                 bool(item[3]) if len(item) > 3 else False)
           for item in ground_truths]
    return evaluate_map(dets, gts, iou_thresh, interpolation)
