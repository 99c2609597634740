"""Synthetic pattern generation and knowledge-combination compositing.

Workflow per training image: sample face/edge colors around annotated
points, spread them onto basic grayscale patterns (preset shapes with
curve textures, or one sketch per category), augment with random
flip/resize/rotation, place the patterns inside the image under a
pairwise rotated-IoU cap, and blend them in with a Gaussian opacity
profile. Every placed pattern comes back with its exact ground-truth
rotated box, which is what supplies the box-regression signal that point
annotations lack.

Images are float arrays of shape (H, W, 3) with values in [0, 1].
All randomness flows through an explicit numpy Generator, so identical
(image, points, config, seed) inputs reproduce bit-identical output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .geometry import RBox, rotated_iou, rotated_nms

# preset (w0, h0) sizes for the rectangle/circle pattern set
SETRC_SIZES = ((160, 160), (160, 80), (160, 40), (80, 80), (80, 40), (80, 20))

EDGE_BAND_PX = 3  # black border thickness of the preset shapes
MIN_PATTERN_PX = 8.0
OPACITY_FLOOR = 0.1
OPACITY_SPAN = 0.9
PLACEMENT_RETRIES = 50
MAX_DEFAULT_PATTERNS = 30

# ITU-R 601 luma weights, also used by PIL's "L" conversion
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

FACE_PATCH = 5  # neighborhood for the face color
EDGE_PATCH = 33  # neighborhood for the gradient-weighted edge color


@dataclass
class BasicPattern:
    """Grayscale pattern bitmap (1 = face, 0 = edge) with an optional
    category (sketch sets carry one per category; preset shapes do not)."""

    bitmap: np.ndarray
    category: str | None = None

    def __post_init__(self):
        self.bitmap = np.clip(np.asarray(self.bitmap, dtype=float), 0.0, 1.0)
        if self.bitmap.ndim != 2 or min(self.bitmap.shape) < 1:
            raise ValueError("pattern bitmap must be a non-empty 2-D array")

    @property
    def width(self) -> int:
        return self.bitmap.shape[1]

    @property
    def height(self) -> int:
        return self.bitmap.shape[0]


@dataclass(frozen=True)
class CurveSpec:
    """Texture drawn on a preset shape: equally spaced parallel lines or
    the polar curve rho = (1 - k) |cos(2 phi)|^n + k."""

    kind: str  # "lines" | "polar"
    exponent: float = 1.0  # n in [0, 8]
    inner_radius: float = 0.3  # k in [0.1, 0.6]
    num_lines: int = 2  # 1..4, used by the "lines" kind

    def __post_init__(self):
        if self.kind not in ("lines", "polar"):
            raise ValueError(f"unknown texture kind {self.kind!r}")
        if not 0.0 <= self.exponent <= 8.0:
            raise ValueError("exponent must be in [0, 8]")
        if not 0.1 <= self.inner_radius <= 0.6:
            raise ValueError("inner radius must be in [0.1, 0.6]")
        if not 1 <= self.num_lines <= 4:
            raise ValueError("num_lines must be in 1..4")

    def radius(self, phi):
        """Polar radius at angle phi; 1.0 maps to the inscribed ellipse."""
        return (1.0 - self.inner_radius) * np.abs(np.cos(2.0 * phi)) ** self.exponent \
            + self.inner_radius


@dataclass
class ColorSample:
    """Face / edge RGB triples extracted around an annotated point."""

    c_face: np.ndarray
    c_edge: np.ndarray

    def __post_init__(self):
        self.c_face = np.asarray(self.c_face, dtype=float).reshape(3)
        self.c_edge = np.asarray(self.c_edge, dtype=float).reshape(3)
        for c in (self.c_face, self.c_edge):
            if c.min() < 0.0 or c.max() > 1.0:
                raise ValueError("color channels must lie in [0, 1]")


@dataclass
class PlacedPattern:
    """A recolored, augmented pattern ready for compositing: upright RGBA
    raster (alpha = opacity profile), ground-truth box, category label."""

    rgba: np.ndarray
    box: RBox
    label: str

    def __post_init__(self):
        alpha = self.rgba[..., 3]
        if alpha.min() < OPACITY_FLOOR - 1e-9 or alpha.max() > 1.0 + 1e-9:
            raise ValueError("opacity channel out of [0.1, 1.0]")


@dataclass
class SynthesisConfig:
    sigma_base: float = 0.4
    sigma_w: float = 0.4
    sigma_r: float = 0.4
    flip_prob: float = 0.5
    rotation_prob: float = 1.0
    placement_iou_max: float = 0.05
    patterns_per_image: int | None = None  # default: one per point, capped at 30
    tight_arrangement_prob: float = 0.3
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("sigma_base", "sigma_w", "sigma_r"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("flip_prob", "rotation_prob", "placement_iou_max",
                     "tight_arrangement_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")


# ---------------------------------------------------------------------------
# basic pattern construction


def library_rng(seed: int) -> np.random.Generator:
    """Generator stream for building the pattern library of one run."""
    return np.random.default_rng(np.random.SeedSequence([seed, 0]))


def image_rng(seed: int, index: int) -> np.random.Generator:
    """Generator stream for synthesizing image `index` (in sorted order)
    of a run; independent of worker scheduling."""
    return np.random.default_rng(np.random.SeedSequence([seed, 1, index]))


def _rect_bitmap(w0: int, h0: int) -> np.ndarray:
    p = np.ones((h0, w0))
    e = EDGE_BAND_PX
    p[:e, :] = 0.0
    p[-e:, :] = 0.0
    p[:, :e] = 0.0
    p[:, -e:] = 0.0
    return p


def _ellipse_bitmap(w0: int, h0: int) -> np.ndarray:
    a, b = w0 / 2.0, h0 / 2.0
    ys = (np.arange(h0) + 0.5 - b)[:, None]
    xs = (np.arange(w0) + 0.5 - a)[None, :]
    rn = np.sqrt((xs / a) ** 2 + (ys / b) ** 2)
    ring_inner = 1.0 - EDGE_BAND_PX / min(a, b)
    p = np.ones((h0, w0))
    p[(rn <= 1.0) & (rn >= ring_inner)] = 0.0
    return p


def _stroke_width(w0: int, h0: int) -> float:
    return max(2.0, 0.02 * min(w0, h0))


def _stamp_lines(bitmap: np.ndarray, num_lines: int, stroke: float) -> None:
    h0 = bitmap.shape[0]
    centers = np.arange(h0) + 0.5
    for i in range(1, num_lines + 1):
        y = i * h0 / (num_lines + 1)
        bitmap[np.abs(centers - y) <= stroke / 2.0, :] = 0.0


def _stamp_polar_curve(bitmap: np.ndarray, spec: CurveSpec, stroke: float) -> None:
    h0, w0 = bitmap.shape
    a, b = w0 / 2.0, h0 / 2.0
    phi = np.linspace(0.0, 2.0 * math.pi, 2048, endpoint=False)
    rho = spec.radius(phi)
    px = a + rho * a * np.cos(phi)
    py = b + rho * b * np.sin(phi)
    r = stroke / 2.0
    reach = int(math.ceil(r + 0.5))
    offs = np.arange(-reach, reach + 1)
    oy, ox = np.meshgrid(offs, offs, indexing="ij")
    for x, y in zip(px, py):
        ci, cj = int(math.floor(y)), int(math.floor(x))
        rows = ci + oy
        cols = cj + ox
        dist2 = (cols + 0.5 - x) ** 2 + (rows + 0.5 - y) ** 2
        hit = (dist2 <= r * r) & (rows >= 0) & (rows < h0) & (cols >= 0) & (cols < w0)
        bitmap[rows[hit], cols[hit]] = 0.0


def sample_curve_spec(rng: np.random.Generator) -> CurveSpec:
    """Draw a texture: both kinds equally likely, n ~ U[0, 8],
    k ~ U[0.1, 0.6], line count uniform over 1..4."""
    kind = "lines" if rng.random() < 0.5 else "polar"
    exponent = float(rng.uniform(0.0, 8.0))
    inner = float(rng.uniform(0.1, 0.6))
    num_lines = int(rng.integers(1, 5))
    return CurveSpec(kind, exponent, inner, num_lines)


def generate_setrc_library(rng: np.random.Generator,
                           with_curves: bool = True) -> list[BasicPattern]:
    """The rectangle/circle preset: one rectangle and one inscribed
    ellipse per preset size (12 patterns), each optionally overlaid with
    a freshly drawn curve texture."""
    patterns = []
    for w0, h0 in SETRC_SIZES:
        for builder in (_rect_bitmap, _ellipse_bitmap):
            bitmap = builder(w0, h0)
            if with_curves:
                spec = sample_curve_spec(rng)
                stroke = _stroke_width(w0, h0)
                if spec.kind == "lines":
                    _stamp_lines(bitmap, spec.num_lines, stroke)
                else:
                    _stamp_polar_curve(bitmap, spec, stroke)
            patterns.append(BasicPattern(bitmap))
    return patterns


def load_sketch_library(directory, categories=None) -> list[BasicPattern]:
    """Load one sketch pattern per category from `<category>.png` files.

    Files are converted to grayscale with ITU-R 601 luma weights
    (0.299, 0.587, 0.114) and normalized to [0, 1]; sketches are expected
    to follow the white-surfaces / black-edges convention.
    """
    directory = Path(directory)
    files = {p.stem: p for p in sorted(directory.glob("*.png"))}
    if categories is not None:
        missing = sorted(set(categories) - set(files))
        if missing:
            raise FileNotFoundError(
                f"no sketch pattern for categories {missing} in {directory}"
            )
        files = {c: files[c] for c in sorted(categories)}
    patterns = []
    for category, path in sorted(files.items()):
        with Image.open(path) as img:
            gray = np.asarray(img.convert("L"), dtype=float) / 255.0
        patterns.append(BasicPattern(gray, category=category))
    if not patterns:
        raise FileNotFoundError(f"no .png sketch patterns found in {directory}")
    return patterns


# ---------------------------------------------------------------------------
# color extraction and recoloring


def _clip_patch(image: np.ndarray, cx: int, cy: int, size: int) -> np.ndarray:
    half = size // 2
    h, w = image.shape[:2]
    r0, r1 = max(0, cy - half), min(h, cy + half + 1)
    c0, c1 = max(0, cx - half), min(w, cx + half + 1)
    return image[r0:r1, c0:c1]


def sample_colors(image: np.ndarray, point) -> ColorSample:
    """Extract the face color (mean of the 5x5 neighborhood) and the edge
    color (gradient-magnitude-weighted mean of the 33x33 neighborhood)
    around a labeled point.

    Near the border the neighborhoods are clipped and the weights
    renormalized; on a gradient-free patch the edge color falls back to
    the face color.
    """
    h, w = image.shape[:2]
    cx = min(max(int(math.floor(point[0])), 0), w - 1)
    cy = min(max(int(math.floor(point[1])), 0), h - 1)
    face_patch = _clip_patch(image, cx, cy, FACE_PATCH)
    c_face = face_patch.reshape(-1, 3).mean(axis=0)

    edge_patch = _clip_patch(image, cx, cy, EDGE_PATCH)
    luma = edge_patch @ LUMA_WEIGHTS
    gx = ndimage.sobel(luma, axis=1, mode="reflect")
    gy = ndimage.sobel(luma, axis=0, mode="reflect")
    d = np.hypot(gx, gy)
    total = d.sum()
    if total < 1e-12:
        c_edge = c_face.copy()
    else:
        c_edge = (edge_patch * (d / total)[..., None]).sum(axis=(0, 1))
    return ColorSample(np.clip(c_face, 0, 1), np.clip(c_edge, 0, 1))


def recolor(pattern: BasicPattern, colors: ColorSample) -> np.ndarray:
    """Per pixel P * c_face + (1 - P) * c_edge; affine in the bitmap."""
    p = pattern.bitmap[..., None]
    return p * colors.c_face + (1.0 - p) * colors.c_edge


# ---------------------------------------------------------------------------
# random augmentation


def random_resize(pattern: BasicPattern, cfg: SynthesisConfig, shared_s_base: float,
                  rng: np.random.Generator, max_size: float | None = None):
    """Log-normal resize: w = s_base exp(sigma_w z) w0 and
    h = (h0/w0) exp(sigma_r z') w, with s_base shared by all patterns of
    one image. Results are clamped to [8 px, max_size]."""
    z_w, z_r = rng.standard_normal(2)
    w = shared_s_base * math.exp(cfg.sigma_w * z_w) * pattern.width
    h = (pattern.height / pattern.width) * math.exp(cfg.sigma_r * z_r) * w
    hi = max_size if max_size is not None else math.inf
    return min(max(w, MIN_PATTERN_PX), hi), min(max(h, MIN_PATTERN_PX), hi)


def shared_base_scale(cfg: SynthesisConfig, rng: np.random.Generator) -> float:
    """s_base = exp(sigma_base * randn()), drawn once per image."""
    return math.exp(cfg.sigma_base * float(rng.standard_normal()))


def alpha_mask(width: int, height: int, rng: np.random.Generator) -> np.ndarray:
    """Gaussian opacity profile t(x, y) = exp(-a x^2 - b y^2) * 0.9 + 0.1
    on the normalized grid x, y in [-1, 1], with a, b ~ U[0.1, 2]."""
    a, b = rng.uniform(0.1, 2.0, size=2)
    xs = np.linspace(-1.0, 1.0, width) if width > 1 else np.zeros(1)
    ys = np.linspace(-1.0, 1.0, height) if height > 1 else np.zeros(1)
    return np.exp(-a * xs[None, :] ** 2 - b * ys[:, None] ** 2) * OPACITY_SPAN \
        + OPACITY_FLOOR


def _resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    in_h, in_w = img.shape[:2]
    ys = (np.arange(out_h) + 0.5) * in_h / out_h - 0.5
    xs = (np.arange(out_w) + 0.5) * in_w / out_w - 0.5
    return _sample_bilinear(img, xs[None, :].repeat(out_h, 0), ys[:, None].repeat(out_w, 1))


def _sample_bilinear(img: np.ndarray, x_idx: np.ndarray, y_idx: np.ndarray) -> np.ndarray:
    """Clamp-to-edge bilinear sampling at fractional index coordinates."""
    in_h, in_w = img.shape[:2]
    x = np.clip(x_idx, 0.0, in_w - 1.0)
    y = np.clip(y_idx, 0.0, in_h - 1.0)
    x0 = np.floor(x).astype(int)
    y0 = np.floor(y).astype(int)
    x1 = np.minimum(x0 + 1, in_w - 1)
    y1 = np.minimum(y0 + 1, in_h - 1)
    fx = (x - x0)[..., None]
    fy = (y - y0)[..., None]
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    return top * (1 - fy) + bot * fy


# ---------------------------------------------------------------------------
# placement and compositing


def _composite(image: np.ndarray, placed: PlacedPattern) -> None:
    """Alpha-blend a placed pattern into the image in place; the blended
    footprint is exactly the pattern's rotated ground-truth box."""
    box = placed.box
    c, s = math.cos(box.theta), math.sin(box.theta)
    ex = 0.5 * (box.w * abs(c) + box.h * abs(s))
    ey = 0.5 * (box.w * abs(s) + box.h * abs(c))
    h, w = image.shape[:2]
    r0 = max(0, int(math.floor(box.y - ey)))
    r1 = min(h, int(math.ceil(box.y + ey)))
    c0 = max(0, int(math.floor(box.x - ex)))
    c1 = min(w, int(math.ceil(box.x + ex)))
    if r0 >= r1 or c0 >= c1:
        return
    gx = (np.arange(c0, c1) + 0.5)[None, :] - box.x
    gy = (np.arange(r0, r1) + 0.5)[:, None] - box.y
    u = gx * c + gy * s
    v = -gx * s + gy * c
    inside = (np.abs(u) <= box.w / 2.0) & (np.abs(v) <= box.h / 2.0)
    sampled = _sample_bilinear(placed.rgba, u + box.w / 2.0 - 0.5, v + box.h / 2.0 - 0.5)
    alpha = sampled[..., 3] * inside
    window = image[r0:r1, c0:c1]
    window[...] = window * (1.0 - alpha[..., None]) + sampled[..., :3] * alpha[..., None]


def _fits_inside(box: RBox, height: int, width: int) -> bool:
    c, s = math.cos(box.theta), math.sin(box.theta)
    ex = 0.5 * (box.w * abs(c) + box.h * abs(s))
    ey = 0.5 * (box.w * abs(s) + box.h * abs(c))
    return ex <= box.x <= width - ex and ey <= box.y <= height - ey


def synthesize(image: np.ndarray, points, library, cfg: SynthesisConfig,
               rng: np.random.Generator | None = None):
    """Overlay recolored, augmented patterns on a training image.

    points: sequence of ((x, y), label). When every library pattern
    carries a category the sketch set is assumed and patterns are matched
    to the label of their color-source point; otherwise any pattern may
    be used. Placement enforces the pairwise overlap cap by rejection
    sampling (up to 50 positions per pattern) with a final NMS sweep as a
    guard; on saturation fewer patterns are emitted rather than ever
    violating the cap. Overlap is measured with rotated IoU (the patterns
    are rotated) and the cap applies between placed patterns only, not
    against pre-existing objects in the image. At most
    `cfg.patterns_per_image` patterns are emitted (default: one per
    annotated point, capped at 30), tight-arrangement replicas included.

    Returns (augmented image copy, list of PlacedPattern).
    """
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed)
    image = np.asarray(image, dtype=float)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError("image must be (H, W, 3)")
    out = image.copy()
    height, width = image.shape[:2]

    count = cfg.patterns_per_image
    if count is None:
        count = min(len(points), MAX_DEFAULT_PATTERNS)
    if count == 0 or not points:
        return out, []
    if not library:
        raise ValueError("pattern library is empty")

    sketch_mode = all(p.category is not None for p in library)
    if sketch_mode:
        by_category = {p.category: p for p in library}
        missing = sorted({label for _, label in points} - set(by_category))
        if missing:
            raise KeyError(f"sketch library lacks patterns for categories {missing}")

    s_base = shared_base_scale(cfg, rng)
    placed: list[PlacedPattern] = []

    attempts = 0
    while len(placed) < count and attempts < count:
        attempts += 1
        point_idx = int(rng.integers(len(points)))
        (px, py), label = points[point_idx]
        if sketch_mode:
            pattern = by_category[label]
        else:
            pattern = library[int(rng.integers(len(library)))]

        colors = sample_colors(image, (px, py))
        bitmap = pattern.bitmap
        if rng.random() < cfg.flip_prob:
            bitmap = np.flipud(bitmap)
        color_raster = recolor(BasicPattern(bitmap, pattern.category), colors)

        theta = 0.0
        if rng.random() < cfg.rotation_prob:
            theta = float(rng.uniform(-math.pi / 2, math.pi / 2))
        w, h = random_resize(pattern, cfg, s_base, rng, max_size=min(height, width))
        w_px, h_px = max(8, int(round(w))), max(8, int(round(h)))

        rgba = np.dstack([
            _resize_bilinear(color_raster, h_px, w_px),
            alpha_mask(w_px, h_px, rng),
        ])

        c, s = math.cos(theta), math.sin(theta)
        ex = 0.5 * (w_px * abs(c) + h_px * abs(s))
        ey = 0.5 * (w_px * abs(s) + h_px * abs(c))
        if 2 * ex > width or 2 * ey > height:
            continue  # cannot fit at this rotation

        candidate = None
        for _ in range(PLACEMENT_RETRIES):
            cx = float(rng.uniform(ex, width - ex))
            cy = float(rng.uniform(ey, height - ey))
            box = RBox(cx, cy, float(w_px), float(h_px), theta)
            if all(rotated_iou(box, q.box) <= cfg.placement_iou_max for q in placed):
                candidate = box
                break
        if candidate is None:
            continue

        first = PlacedPattern(rgba, candidate, label)
        placed.append(first)

        # occasionally expand into a tightly arranged row along the
        # pattern's own w direction (replicas count toward the budget)
        if rng.random() < cfg.tight_arrangement_prob:
            group = int(rng.integers(2, 5))
            for m in range(1, group):
                if len(placed) >= count:
                    break
                shifted = RBox(candidate.x + m * w_px * c, candidate.y + m * w_px * s,
                               float(w_px), float(h_px), theta)
                if not _fits_inside(shifted, height, width):
                    break
                if any(rotated_iou(shifted, q.box) > cfg.placement_iou_max for q in placed):
                    break
                placed.append(PlacedPattern(rgba, shifted, label))

    # guard sweep: rejection sampling already enforces the cap, but keep
    # the invariant unconditional
    keep = rotated_nms([(q.box, float(len(placed) - i)) for i, q in enumerate(placed)],
                       cfg.placement_iou_max)
    placed = [placed[i] for i in sorted(keep)]

    for q in placed:
        _composite(out, q)
    return out, placed
