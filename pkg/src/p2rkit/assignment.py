"""Classification-score-based label assignment on a fixed-size anchor grid.

Point annotations carry no size information, so IoU-based or multi-level
assignment is off the table: all anchors share one fixed size on a single
stride-16 lattice, and ground truths (annotated points as well as
synthetic boxes) claim the anchors that score highest for their class,
subject to a 32 px center-distance gate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import RBox

STRIDE = 16
ANCHOR_SIZE_DOTA = 64
ANCHOR_SIZE_LARGE = 128
ANCHORS_PER_CELL = 5
POSITIVES_PER_GT = 4
CENTER_GATE_L1 = 32.0


@dataclass(frozen=True)
class AnchorGrid:
    """Fixed-size anchor lattice: `anchors_per_cell` identical anchors
    centered at ((j + 0.5) * stride, (i + 0.5) * stride) per cell."""

    image_size: tuple[int, int]  # (height, width)
    stride: int = STRIDE
    anchor_size: int = ANCHOR_SIZE_DOTA
    anchors_per_cell: int = ANCHORS_PER_CELL

    def __post_init__(self):
        if self.stride <= 0:
            raise ValueError("stride must be positive")
        if self.anchors_per_cell not in (1, 3, 5):
            raise ValueError("anchors_per_cell must be 1, 3 or 5")

    @property
    def rows(self) -> int:
        return -(-self.image_size[0] // self.stride)

    @property
    def cols(self) -> int:
        return -(-self.image_size[1] // self.stride)

    @property
    def num_cells(self) -> int:
        return self.rows * self.cols

    @property
    def num_anchors(self) -> int:
        return self.num_cells * self.anchors_per_cell

    def anchor_centers(self) -> np.ndarray:
        """(num_anchors, 2) centers; anchor index = cell * anchors_per_cell + a."""
        ys = (np.arange(self.rows) + 0.5) * self.stride
        xs = (np.arange(self.cols) + 0.5) * self.stride
        gx, gy = np.meshgrid(xs, ys)
        cells = np.stack([gx.ravel(), gy.ravel()], axis=1)
        return np.repeat(cells, self.anchors_per_cell, axis=0)


@dataclass(frozen=True)
class AssignTarget:
    """One ground truth for assignment: an annotated point or a synthetic
    box (gated by its center)."""

    xy: tuple[float, float]
    label: int
    kind: str  # "point" | "box"
    box: RBox | None = None

    def __post_init__(self):
        if self.kind not in ("point", "box"):
            raise ValueError(f"unknown target kind {self.kind!r}")
        if self.kind == "box" and self.box is None:
            raise ValueError("box targets need a box")

    @classmethod
    def from_point(cls, xy, label: int) -> "AssignTarget":
        return cls((float(xy[0]), float(xy[1])), int(label), "point")

    @classmethod
    def from_box(cls, box: RBox, label: int) -> "AssignTarget":
        return cls((box.x, box.y), int(label), "box", box)


@dataclass
class AssignResult:
    """Positive anchors per ground truth plus the derived masks.

    matched_gt holds, per anchor, the within-kind index of its ground
    truth (into the point list for m_point anchors, into the box list for
    m_box anchors), or -1 for background.
    """

    positives: list[list[int]]
    m_point: np.ndarray
    m_box: np.ndarray
    matched_gt: np.ndarray
    unassigned_gts: list[int] = field(default_factory=list)


def matching_score(pred_center, pred_scores, gt_xy, gt_label: int) -> float:
    """Gate-and-score: 0 if the L1 center distance exceeds 32 px,
    otherwise the predicted probability of the ground-truth class."""
    d = abs(pred_center[0] - gt_xy[0]) + abs(pred_center[1] - gt_xy[1])
    if d > CENTER_GATE_L1:
        return 0.0
    return float(pred_scores[gt_label])


def assign(grid: AnchorGrid, pred_centers: np.ndarray, pred_scores: np.ndarray,
           targets: list[AssignTarget], k: int = POSITIVES_PER_GT) -> AssignResult:
    """Give each ground truth its top-k anchors by matching score.

    Candidate (gt, anchor) pairs are ranked globally by descending score,
    ties broken by smaller center L1 distance, then lower anchor index,
    then lower gt index; each anchor serves at most one ground truth, so
    a contested anchor goes to the gt scoring highest on it and the other
    gt falls back to its next-best candidate.
    """
    pred_centers = np.asarray(pred_centers, dtype=float).reshape(-1, 2)
    pred_scores = np.asarray(pred_scores, dtype=float)
    n = pred_centers.shape[0]
    if n != grid.num_anchors:
        raise ValueError(f"expected {grid.num_anchors} anchor predictions, got {n}")

    candidates = []  # (-score, distance, anchor, gt)
    for g, tgt in enumerate(targets):
        d = np.abs(pred_centers[:, 0] - tgt.xy[0]) + np.abs(pred_centers[:, 1] - tgt.xy[1])
        for a in np.flatnonzero(d <= CENTER_GATE_L1):
            candidates.append((-float(pred_scores[a, tgt.label]), float(d[a]), int(a), g))
    candidates.sort()

    positives: list[list[int]] = [[] for _ in targets]
    anchor_taken = np.zeros(n, dtype=bool)
    for _, _, a, g in candidates:
        if anchor_taken[a] or len(positives[g]) >= k:
            continue
        anchor_taken[a] = True
        positives[g].append(a)

    m_point = np.zeros(n, dtype=bool)
    m_box = np.zeros(n, dtype=bool)
    matched = np.full(n, -1, dtype=int)
    point_idx = box_idx = 0
    for g, tgt in enumerate(targets):
        within = point_idx if tgt.kind == "point" else box_idx
        for a in positives[g]:
            (m_point if tgt.kind == "point" else m_box)[a] = True
            matched[a] = within
        if tgt.kind == "point":
            point_idx += 1
        else:
            box_idx += 1

    unassigned = [g for g, pos in enumerate(positives) if not pos]
    return AssignResult(positives, m_point, m_box, matched, unassigned)
