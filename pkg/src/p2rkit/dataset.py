"""DOTA-format annotation parsing, point derivation, patch splitting and
detection merging for large aerial imagery.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import RBox, min_area_rbox, rotated_nms

PATCH_SIZE = 1024
PATCH_OVERLAP = 200
MERGE_NMS_IOU = 0.1

_HEADER_PREFIXES = ("imagesource", "gsd")


@dataclass
class GtRecord:
    """One annotated object: corner polygon, category, difficulty flag,
    and the rotated box fitted to the polygon."""

    polygon: np.ndarray  # (8,) x1 y1 ... x4 y4
    category: str
    difficult: bool = False

    def __post_init__(self):
        self.polygon = np.asarray(self.polygon, dtype=float).reshape(8)
        self.box = min_area_rbox(self.polygon.reshape(4, 2))

    def shifted(self, dx: float, dy: float) -> "GtRecord":
        poly = self.polygon.copy()
        poly[0::2] += dx
        poly[1::2] += dy
        return GtRecord(poly, self.category, self.difficult)


@dataclass(frozen=True)
class PointAnnotation:
    """A single-point annotation: coordinate, category, and whether the
    point is the exact object center or noise-perturbed."""

    x: float
    y: float
    category: str
    source: str = "exact-center"


@dataclass
class ImagePatch:
    image: np.ndarray
    gts: list[GtRecord]
    offset: tuple[int, int]  # (x, y) of the patch origin in the source image


def parse_dota(path) -> list[GtRecord]:
    """Parse a DOTA annotation file: 8 corner floats, category, and an
    optional difficulty flag per line; imagesource/gsd headers skipped."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or any(line.startswith(h) for h in _HEADER_PREFIXES):
                continue
            parts = line.split()
            if len(parts) not in (9, 10):
                raise ValueError(f"{path}:{lineno}: expected 9 or 10 fields, got {len(parts)}")
            try:
                coords = [float(v) for v in parts[:8]]
                difficult = bool(int(parts[9])) if len(parts) == 10 else False
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: malformed numeric field ({exc})") from None
            records.append(GtRecord(np.array(coords), parts[8], difficult))
    return records


def write_dota(path, records) -> None:
    """Write GtRecords in the DOTA text format (corners, category, flag)."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            corners = " ".join(f"{v:.6g}" for v in rec.polygon)
            fh.write(f"{corners} {rec.category} {int(rec.difficult)}\n")


def gt_record_from_box(box: RBox, category: str, difficult: bool = False) -> GtRecord:
    return GtRecord(box.corners().reshape(8), category, difficult)


def derive_points(gts, sigma: float, rng: np.random.Generator,
                  image_size=None) -> list[PointAnnotation]:
    """Turn box annotations into point annotations at the box center plus
    independent per-axis uniform noise in [-sigma*H, sigma*H], H being the
    object height. With image_size = (height, width) points are clamped
    into bounds."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    points = []
    source = "exact-center" if sigma == 0 else f"noisy({sigma:g})"
    for rec in gts:
        box = rec.box
        x, y = box.x, box.y
        if sigma > 0:
            reach = sigma * box.h
            x += float(rng.uniform(-reach, reach))
            y += float(rng.uniform(-reach, reach))
        if image_size is not None:
            h, w = image_size
            x = min(max(x, 0.0), float(w))
            y = min(max(y, 0.0), float(h))
        points.append(PointAnnotation(x, y, rec.category, source))
    return points


def tile_origins(length: int, patch: int, stride: int) -> list[int]:
    """Window origins along one axis: stride steps plus a final window
    flush with the far edge."""
    if length <= patch:
        return [0]
    origins = list(range(0, length - patch + 1, stride))
    if origins[-1] + patch < length:
        origins.append(length - patch)
    return origins


def split_image(image: np.ndarray, gts, patch: int = PATCH_SIZE,
                overlap: int = PATCH_OVERLAP) -> list[ImagePatch]:
    """Tile a large image into overlapping patches and remap annotations.

    Objects belong to a patch iff their box center lies inside it.
    Images smaller than the patch size yield a single zero-padded patch.
    """
    if patch <= overlap:
        raise ValueError("patch size must exceed overlap")
    image = np.asarray(image)
    h, w = image.shape[:2]
    stride = patch - overlap
    patches = []
    for oy in tile_origins(h, patch, stride):
        for ox in tile_origins(w, patch, stride):
            window = image[oy:oy + patch, ox:ox + patch]
            if window.shape[0] < patch or window.shape[1] < patch:
                padded = np.zeros((patch, patch) + image.shape[2:], dtype=image.dtype)
                padded[:window.shape[0], :window.shape[1]] = window
                window = padded
            kept = [
                rec.shifted(-ox, -oy)
                for rec in gts
                if ox <= rec.box.x < ox + patch and oy <= rec.box.y < oy + patch
            ]
            patches.append(ImagePatch(window, kept, (ox, oy)))
    return patches


def merge_detections(per_patch, offsets, nms_iou: float = MERGE_NMS_IOU):
    """Merge per-patch detections into source-image coordinates.

    per_patch: one list of (RBox, score, category) per patch, aligned
    with offsets. Detections are translated to global coordinates and
    deduplicated by per-category rotated NMS.
    """
    if len(per_patch) != len(offsets):
        raise ValueError("per_patch and offsets must be the same length")
    translated = []
    for dets, (ox, oy) in zip(per_patch, offsets):
        for box, score, category in dets:
            translated.append(
                (RBox(box.x + ox, box.y + oy, box.w, box.h, box.theta), score, category)
            )
    merged = []
    for category in sorted({c for _, _, c in translated}):
        group = [t for t in translated if t[2] == category]
        keep = rotated_nms([(b, s) for b, s, _ in group], nms_iou)
        merged.extend(group[i] for i in keep)
    merged.sort(key=lambda t: (-t[1], t[2]))
    return merged


# ---------------------------------------------------------------------------
# CSV surfaces


def write_detections_csv(path, rows) -> None:
    """Detections as `image_id, category, score, x, y, w, h, theta` lines."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        for image_id, category, score, box in rows:
            writer.writerow([image_id, category, f"{score:.6g}",
                             f"{box.x:.6g}", f"{box.y:.6g}", f"{box.w:.6g}",
                             f"{box.h:.6g}", f"{box.theta:.9g}"])


def read_detections_csv(path):
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if len(row) != 8:
                raise ValueError(f"{path}:{lineno}: expected 8 columns, got {len(row)}")
            image_id, category = row[0].strip(), row[1].strip()
            score, x, y, w, h, theta = (float(v) for v in row[2:])
            rows.append((image_id, category, score, RBox(x, y, w, h, theta)))
    return rows


def write_points_csv(path, rows) -> None:
    """Point annotations as `image_id, category, x, y` lines."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        for image_id, pt in rows:
            writer.writerow([image_id, pt.category, f"{pt.x:.6g}", f"{pt.y:.6g}"])


def read_points_csv(path):
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if len(row) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 columns, got {len(row)}")
            rows.append((row[0].strip(),
                         PointAnnotation(float(row[2]), float(row[3]), row[1].strip())))
    return rows


# ---------------------------------------------------------------------------
# image helpers (row-major uint8 RGB <-> float arrays in [0, 1])


def image_to_float(buffer: np.ndarray) -> np.ndarray:
    """Validate a row-major 8-bit RGB buffer and convert to float [0, 1]."""
    buffer = np.asarray(buffer)
    if buffer.dtype != np.uint8:
        raise ValueError(f"expected a uint8 buffer, got dtype {buffer.dtype}")
    if buffer.ndim != 3 or buffer.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) buffer, got shape {buffer.shape}")
    return buffer.astype(float) / 255.0


def image_to_uint8(image: np.ndarray) -> np.ndarray:
    """Quantize a float image in [0, 1] to uint8 (round half to even)."""
    return np.clip(np.rint(np.asarray(image) * 255.0), 0, 255).astype(np.uint8)


def load_image(path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as img:
        data = np.asarray(img.convert("RGB"), dtype=np.uint8)
    return image_to_float(data)


def save_image(path, image: np.ndarray) -> None:
    from PIL import Image

    Image.fromarray(image_to_uint8(image), mode="RGB").save(Path(path))
