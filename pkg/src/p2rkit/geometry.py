"""Rotated / horizontal box types and geometric primitives.

Conventions used throughout the toolkit:

* Image frame: origin at the top-left corner, x to the right, y down.
  The continuous image domain is [0, W] x [0, H]; the pixel at row i,
  column j covers [j, j+1) x [i, i+1) and has its center at
  (j + 0.5, i + 0.5).
* Rotation is positive clockwise on screen, i.e. the plain rotation
  matrix [[cos, -sin], [sin, cos]] applied in pixel coordinates.
* Angles follow the "le90" convention: theta in [-pi/2, pi/2), measured
  from the +x axis to the w-edge of the box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Boxes with area below this are treated as degenerate (IoU defined 0).
DEGENERATE_AREA = 1e-12

HALF_PI = math.pi / 2


def normalize_angle(x: float) -> float:
    """Wrap an angle into [-pi/2, pi/2): ((x + pi/2) mod pi) - pi/2."""
    if not math.isfinite(x):
        raise ValueError(f"angle must be finite, got {x!r}")
    return (x + HALF_PI) % math.pi - HALF_PI


@dataclass(frozen=True)
class RBox:
    """Rotated box (x, y, w, h, theta): center, extents, orientation.

    theta is normalized into [-pi/2, pi/2) on construction.
    """

    x: float
    y: float
    w: float
    h: float
    theta: float = 0.0

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"RBox.{name} must be finite, got {v!r}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"RBox extents must be positive, got w={self.w}, h={self.h}")
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    @property
    def area(self) -> float:
        return self.w * self.h

    def corners(self) -> np.ndarray:
        """The four corners, shape (4, 2), ordered with positive shoelace area."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        dx = np.array([-self.w, self.w, self.w, -self.w]) * 0.5
        dy = np.array([-self.h, -self.h, self.h, self.h]) * 0.5
        return np.stack([self.x + dx * c - dy * s, self.y + dx * s + dy * c], axis=1)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.w, self.h, self.theta], dtype=float)

    @classmethod
    def from_array(cls, arr) -> "RBox":
        x, y, w, h, t = (float(v) for v in arr)
        return cls(x, y, w, h, t)


@dataclass(frozen=True)
class HBox:
    """Axis-aligned box (x_min, y_min, x_max, y_max)."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"HBox corners out of order: {self}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def scaled(self, s: float) -> "HBox":
        """Scale about the origin (all coordinates multiplied by s)."""
        return HBox(self.x_min * s, self.y_min * s, self.x_max * s, self.y_max * s)


@dataclass(frozen=True)
class TransformSpec:
    """A view transform: vertical flip, rotation about the image center,
    or uniform scaling about the origin."""

    kind: str  # "flip" | "rotate" | "scale"
    angle: float | None = None  # rotation angle, radians (kind == "rotate")
    factor: float | None = None  # scale factor (kind == "scale")

    def __post_init__(self):
        if self.kind not in ("flip", "rotate", "scale"):
            raise ValueError(f"unknown transform kind {self.kind!r}")
        if self.kind == "rotate" and self.angle is None:
            raise ValueError("rotate transform requires an angle")
        if self.kind == "scale" and self.factor is None:
            raise ValueError("scale transform requires a factor")
        if self.kind == "flip" and (self.angle is not None or self.factor is not None):
            raise ValueError("flip transform takes no parameters")


def rbox_to_hbox(b: RBox) -> HBox:
    """Smallest axis-aligned box containing the rotated box."""
    ex, ey = _hbox_half_extents(b.w, b.h, b.theta)
    return HBox(b.x - ex, b.y - ey, b.x + ex, b.y + ey)


def _hbox_half_extents(w: float, h: float, theta: float) -> tuple[float, float]:
    c, s = abs(math.cos(theta)), abs(math.sin(theta))
    return 0.5 * (w * c + h * s), 0.5 * (w * s + h * c)


def polygon_area(pts: np.ndarray) -> float:
    """Signed shoelace area of a polygon given as an (n, 2) array."""
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def clip_polygon(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clipping of a polygon against a convex polygon.

    Both polygons are (n, 2) arrays; `clip` must be convex with positive
    shoelace orientation. Returns the clipped polygon ((m, 2), possibly
    empty).
    """
    output = [tuple(p) for p in subject]
    n = len(clip)
    for i in range(n):
        if not output:
            break
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        polygon = output
        output = []
        prev = polygon[-1]
        prev_side = ex * (prev[1] - ay) - ey * (prev[0] - ax)
        for cur in polygon:
            cur_side = ex * (cur[1] - ay) - ey * (cur[0] - ax)
            # cross >= 0 means inside for a positively oriented clip edge
            if cur_side >= 0:
                if prev_side < 0:
                    output.append(_edge_intersection(prev, cur, prev_side, cur_side))
                output.append(cur)
            elif prev_side >= 0:
                output.append(_edge_intersection(prev, cur, prev_side, cur_side))
            prev, prev_side = cur, cur_side
    return np.array(output, dtype=float).reshape(-1, 2)


def _edge_intersection(p, q, side_p, side_q):
    t = side_p / (side_p - side_q)
    return (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))


def rotated_iou(a: RBox, b: RBox) -> float:
    """Exact IoU of two rotated boxes via convex clipping + shoelace area.

    Degenerate boxes (area < 1e-12) yield 0 rather than NaN.
    """
    area_a, area_b = a.area, b.area
    if area_a < DEGENERATE_AREA or area_b < DEGENERATE_AREA:
        return 0.0
    # cheap reject on circumscribed boxes
    ha, hb = rbox_to_hbox(a), rbox_to_hbox(b)
    if ha.x_max <= hb.x_min or hb.x_max <= ha.x_min:
        return 0.0
    if ha.y_max <= hb.y_min or hb.y_max <= ha.y_min:
        return 0.0
    inter_poly = clip_polygon(a.corners(), b.corners())
    if len(inter_poly) < 3:
        return 0.0
    inter = abs(polygon_area(inter_poly))
    union = area_a + area_b - inter
    if union <= 0:
        return 0.0
    return min(1.0, inter / union)


def raster_iou_oracle(a: RBox, b: RBox, resolution: int = 2000) -> float:
    """Brute-force IoU oracle: count grid-cell centers inside each box.

    A `resolution` x `resolution` grid of cell centers is laid over the
    joint bounding region of the two boxes; the per-row inside set of a
    convex box is an interval, so the counting is done one scanline at a
    time. The result equals the naive per-cell membership count and
    converges to the exact IoU as resolution grows.
    """
    if resolution < 256:
        raise ValueError(f"resolution must be >= 256, got {resolution}")
    if a.area < DEGENERATE_AREA or b.area < DEGENERATE_AREA:
        return 0.0
    pts = np.vstack([a.corners(), b.corners()])
    gx0, gy0 = pts.min(axis=0)
    gx1, gy1 = pts.max(axis=0)
    dx = (gx1 - gx0) / resolution
    dy = (gy1 - gy0) / resolution
    if dx <= 0 or dy <= 0:
        return 0.0
    ys = gy0 + (np.arange(resolution) + 0.5) * dy
    lo_a, hi_a = _scanline_intervals(a, ys)
    lo_b, hi_b = _scanline_intervals(b, ys)
    count_a = _centers_in_interval(lo_a, hi_a, gx0, dx, resolution)
    count_b = _centers_in_interval(lo_b, hi_b, gx0, dx, resolution)
    count_i = _centers_in_interval(
        np.maximum(lo_a, lo_b), np.minimum(hi_a, hi_b), gx0, dx, resolution
    )
    inter = float(count_i.sum())
    union = float(count_a.sum()) + float(count_b.sum()) - inter
    return inter / union if union > 0 else 0.0


def _scanline_intervals(box: RBox, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-scanline [lo, hi] in x where the box membership test holds.

    Membership is |u| <= w/2 and |v| <= h/2 with (u, v) the point in the
    box frame; both constraints are linear in x along a row.
    """
    c, s = math.cos(box.theta), math.sin(box.theta)
    lo = np.full(ys.shape, -np.inf)
    hi = np.full(ys.shape, np.inf)
    # u =  c*(x - bx) + s*(y - by)  ->  slope  c
    # v = -s*(x - bx) + c*(y - by)  ->  slope -s
    for slope, y_coef, const, half in (
        (c, s, -c * box.x - s * box.y, 0.5 * box.w),
        (-s, c, s * box.x - c * box.y, 0.5 * box.h),
    ):
        offs = y_coef * ys + const
        if abs(slope) < 1e-15:
            ok = np.abs(offs) <= half
            lo = np.where(ok, lo, np.inf)
            hi = np.where(ok, hi, -np.inf)
        else:
            e1 = (-half - offs) / slope
            e2 = (half - offs) / slope
            lo = np.maximum(lo, np.minimum(e1, e2))
            hi = np.minimum(hi, np.maximum(e1, e2))
    return lo, hi


def _centers_in_interval(lo, hi, gx0: float, dx: float, resolution: int) -> np.ndarray:
    """Count cell centers gx0 + (k + 0.5) dx, 0 <= k < resolution, in [lo, hi]."""
    with np.errstate(invalid="ignore"):
        k_lo = np.ceil((lo - gx0) / dx - 0.5)
        k_hi = np.floor((hi - gx0) / dx - 0.5)
    k_lo = np.clip(np.nan_to_num(k_lo, nan=resolution, posinf=resolution, neginf=0), 0, resolution)
    k_hi = np.clip(np.nan_to_num(k_hi, nan=-1, posinf=resolution - 1, neginf=-1), -1, resolution - 1)
    return np.maximum(0.0, k_hi - k_lo + 1)


def hbox_iou(a: HBox, b: HBox) -> float:
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    inter = max(0.0, iw) * max(0.0, ih)
    union = a.area + b.area - inter
    return inter / union if union > 0 else 0.0


def hbox_giou(a: HBox, b: HBox) -> float:
    """Generalized IoU: IoU minus the normalized empty area of the
    smallest enclosing box. In (-1, 1], 1 iff the boxes coincide."""
    if a.area < DEGENERATE_AREA and b.area < DEGENERATE_AREA:
        raise ValueError("GIoU undefined for two degenerate boxes")
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    inter = max(0.0, iw) * max(0.0, ih)
    union = a.area + b.area - inter
    enclosing = (max(a.x_max, b.x_max) - min(a.x_min, b.x_min)) * (
        max(a.y_max, b.y_max) - min(a.y_min, b.y_min)
    )
    iou = inter / union if union > 0 else 0.0
    return iou - (enclosing - union) / enclosing


def rotated_nms(boxes: list[tuple[RBox, float]], iou_threshold: float) -> list[int]:
    """Greedy non-maximum suppression on rotated boxes.

    Returns kept indices in descending-score order (ties keep the lower
    index first); every kept pair has rotated IoU <= iou_threshold.
    """
    order = sorted(range(len(boxes)), key=lambda i: (-boxes[i][1], i))
    kept: list[int] = []
    for i in order:
        box_i = boxes[i][0]
        if all(rotated_iou(box_i, boxes[j][0]) <= iou_threshold for j in kept):
            kept.append(i)
    return kept


def transform_rbox(b: RBox, t: TransformSpec, image_size: tuple[int, int]) -> RBox:
    """Map a box by the box-level image of a view transform.

    `image_size` is (height, width). Flip is vertical (y -> H - y),
    rotation is about the image center, scaling is about the origin.
    """
    height, width = image_size
    if t.kind == "flip":
        return RBox(b.x, height - b.y, b.w, b.h, normalize_angle(-b.theta))
    if t.kind == "rotate":
        c, s = math.cos(t.angle), math.sin(t.angle)
        cx, cy = width / 2.0, height / 2.0
        rx, ry = b.x - cx, b.y - cy
        return RBox(cx + rx * c - ry * s, cy + rx * s + ry * c, b.w, b.h,
                    normalize_angle(b.theta + t.angle))
    # scale
    f = t.factor
    return RBox(b.x * f, b.y * f, b.w * f, b.h * f, b.theta)


def min_area_rbox(points: np.ndarray) -> RBox:
    """Minimum-area rotated rectangle enclosing a small point set.

    Checks every edge direction of the convex hull (rotating calipers on
    a handful of points); intended for quad-polygon annotations.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    hull = _convex_hull(pts)
    if len(hull) == 1:
        raise ValueError("cannot fit a rotated box to a single point")
    if len(hull) == 2:
        # collinear input: zero-height rectangles are invalid
        raise ValueError("points are collinear; rotated box would be degenerate")
    best = None
    n = len(hull)
    for i in range(n):
        ex, ey = hull[(i + 1) % n] - hull[i]
        phi = math.atan2(ey, ex)
        c, s = math.cos(phi), math.sin(phi)
        # rotate points by -phi so the candidate edge is horizontal
        u = hull[:, 0] * c + hull[:, 1] * s
        v = -hull[:, 0] * s + hull[:, 1] * c
        w = u.max() - u.min()
        h = v.max() - v.min()
        area = w * h
        if best is None or area < best[0] - 1e-12:
            cu, cv = (u.max() + u.min()) / 2.0, (v.max() + v.min()) / 2.0
            cx = cu * c - cv * s
            cy = cu * s + cv * c
            best = (area, RBox(float(cx), float(cy), float(w), float(h),
                               normalize_angle(phi)))
    return best[1]


def _convex_hull(pts: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain; returns hull vertices (positive shoelace)."""
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]
    # drop duplicates
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.any(np.abs(np.diff(pts, axis=0)) > 1e-12, axis=1)
    pts = pts[keep]
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[np.ndarray] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[np.ndarray] = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])
