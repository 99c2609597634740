"""Operator surface: dataset synthesis, patch split/merge, assignment
reports, gradient checks, fitting demos, evaluation, and overlay dumps.

Every command is deterministic under a fixed --seed and never mutates its
inputs. Options may also come from a flat key=value config file passed
with --config; explicit command-line values win over the file, the file
wins over built-in defaults. The P2RKIT_THREADS environment variable
caps the per-image worker pool.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import assignment, dataset, evaluation, losses, synthesis, transforms
from .geometry import RBox

# config-file keys and how to coerce them (same names as the CLI flags)
_CONFIG_TYPES = {
    "seed": int,
    "pattern_set": str,
    "sketch_dir": str,
    "patch_size": int,
    "overlap": int,
    "anchors": int,
    "anchor_size": int,
    "sigma_noise": float,
    "out": str,
    "iou": float,
    "nms_iou": float,
    "trials": int,
    "epsilon": float,
    "mode": str,
    "patterns_per_image": int,
    "interpolation": str,
}


def worker_count() -> int:
    env = os.environ.get("P2RKIT_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def _read_config(path) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SystemExit(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _apply_config(args: argparse.Namespace) -> argparse.Namespace:
    if not getattr(args, "config", None):
        return args
    file_cfg = _read_config(args.config)
    for key, caster in _CONFIG_TYPES.items():
        if getattr(args, key, "missing") is None and key in file_cfg:
            setattr(args, key, caster(file_cfg[key]))
    return args


def _default(value, fallback):
    return fallback if value is None else value


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# synth


def _load_library(pattern_set: str, sketch_dir, categories, seed: int):
    if pattern_set == "setrc":
        return synthesis.generate_setrc_library(synthesis.library_rng(seed))
    if sketch_dir is None:
        raise SystemExit("--sketch-dir is required with --pattern-set setsk")
    return synthesis.load_sketch_library(sketch_dir, categories)


def _synth_one(job):
    index, image_id, image_path, pts, library, cfg, seed, out_dir = job
    image = dataset.load_image(image_path)
    rng = synthesis.image_rng(seed, index)
    augmented, placed = synthesis.synthesize(
        image, [((p.x, p.y), p.category) for p in pts], library, cfg, rng)
    image_out = out_dir / "images" / f"{image_id}.png"
    ann_out = out_dir / "annotations" / f"{image_id}.txt"
    dataset.save_image(image_out, augmented)
    dataset.write_dota(ann_out, [dataset.gt_record_from_box(p.box, p.label)
                                 for p in placed])
    return image_id, {
        "image_sha256": _sha256(image_out),
        "annotation_sha256": _sha256(ann_out),
        "patterns": len(placed),
    }


def cmd_synth(args) -> int:
    seed = _default(args.seed, 0)
    pattern_set = _default(args.pattern_set, "setrc")
    out_dir = Path(args.out)
    points = dataset.read_points_csv(args.points)
    by_image: dict[str, list] = {}
    for image_id, pt in points:
        by_image.setdefault(image_id, []).append(pt)

    image_paths = sorted(Path(args.images).glob("*.png"))
    if not image_paths:
        raise SystemExit(f"no .png images in {args.images}")
    categories = sorted({pt.category for _, pt in points})
    library = _load_library(pattern_set, args.sketch_dir, categories, seed)

    cfg = synthesis.SynthesisConfig(rng_seed=seed)
    if args.patterns_per_image is not None:
        cfg.patterns_per_image = args.patterns_per_image

    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "annotations").mkdir(parents=True, exist_ok=True)
    jobs = [
        (i, path.stem, path, by_image.get(path.stem, []), library, cfg, seed, out_dir)
        for i, path in enumerate(image_paths)
    ]
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        entries = dict(pool.map(_synth_one, jobs))

    manifest = {
        "seed": seed,
        "pattern_set": pattern_set,
        "images": {k: entries[k] for k in sorted(entries)},
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    total = sum(e["patterns"] for e in entries.values())
    print(f"synthesized {len(entries)} images, {total} patterns -> {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# points (annotation-noise model)


def cmd_points(args) -> int:
    seed = _default(args.seed, 0)
    sigma = _default(args.sigma_noise, 0.0)
    rng = np.random.default_rng(seed)
    rows = []
    for path in sorted(Path(args.gts).glob("*.txt")):
        gts = dataset.parse_dota(path)
        for pt in dataset.derive_points(gts, sigma, rng):
            rows.append((path.stem, pt))
    dataset.write_points_csv(args.out, rows)
    print(f"derived {len(rows)} points (sigma={sigma:g}) -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# gradcheck


def cmd_gradcheck(args) -> int:
    trials = _default(args.trials, 1000)
    epsilon = _default(args.epsilon, 1e-5)
    rng = np.random.default_rng(_default(args.seed, 0))
    names = ("smooth_l1", "loss_flip", "loss_rotate", "loss_scale", "loss_box")
    worst_overall = 0.0
    for name in names:
        worst = 0.0
        for _ in range(trials):
            params, fixed = losses.sample_smooth_params(name, rng, epsilon)
            worst = max(worst, losses.grad_check(name, params, epsilon, **fixed))
        worst_overall = max(worst_overall, worst)
        print(f"{name:12s} max relative error {worst:.3e} over {trials} points")
    print(f"overall max relative error {worst_overall:.3e}")
    return 0 if worst_overall <= 1e-6 else 2


# ---------------------------------------------------------------------------
# fitdemo


def cmd_fitdemo(args) -> int:
    mode = _default(args.mode, "rotate")
    rng = np.random.default_rng(_default(args.seed, 0))
    problem = transforms.make_demo_problem(mode, rng)
    result = transforms.fit_demo(problem)
    if args.out:
        transforms.write_loss_trajectory(args.out, result.losses)
    print(f"fit '{mode}': {result.iterations} iterations, "
          f"final loss {result.losses[-1]:.3e}")
    if mode == "rotate":
        residual = transforms.rotation_residual(result, problem).max()
        print(f"max rotation-consistency residual {residual:.3e}")
    if mode == "supervised":
        err = np.nanmax(transforms.parameter_errors(result, problem))
        print(f"max parameter error vs targets {err:.3e}")
    return 0


# ---------------------------------------------------------------------------
# split / merge


def cmd_split(args) -> int:
    patch = _default(args.patch_size, dataset.PATCH_SIZE)
    overlap = _default(args.overlap, dataset.PATCH_OVERLAP)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    image_path = Path(args.image)
    image = dataset.load_image(image_path)
    gts = dataset.parse_dota(args.ann) if args.ann else []
    patches = dataset.split_image(image, gts, patch, overlap)
    manifest = {"source": image_path.stem, "patch_size": patch, "overlap": overlap,
                "patches": {}}
    for p in patches:
        ox, oy = p.offset
        patch_id = f"{image_path.stem}__{ox}_{oy}"
        dataset.save_image(out_dir / f"{patch_id}.png", p.image)
        dataset.write_dota(out_dir / f"{patch_id}.txt", p.gts)
        manifest["patches"][patch_id] = {"offset": [ox, oy]}
    with open(out_dir / "patches.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    print(f"split into {len(patches)} patches -> {out_dir}")
    return 0


def cmd_merge(args) -> int:
    nms_iou = _default(args.nms_iou, dataset.MERGE_NMS_IOU)
    with open(args.manifest, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    dets = dataset.read_detections_csv(args.dets)
    patch_ids = sorted(manifest["patches"])
    by_patch = {pid: [] for pid in patch_ids}
    for image_id, category, score, box in dets:
        if image_id not in by_patch:
            raise SystemExit(f"detection references unknown patch {image_id!r}")
        by_patch[image_id].append((box, score, category))
    offsets = [tuple(manifest["patches"][pid]["offset"]) for pid in patch_ids]
    merged = dataset.merge_detections([by_patch[pid] for pid in patch_ids],
                                      offsets, nms_iou)
    source = manifest["source"]
    dataset.write_detections_csv(
        args.out, [(source, category, score, box) for box, score, category in merged])
    print(f"merged {len(dets)} detections into {len(merged)} -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# assign


def cmd_assign(args) -> int:
    seed = _default(args.seed, 0)
    anchors = _default(args.anchors, assignment.ANCHORS_PER_CELL)
    anchor_size = _default(args.anchor_size, assignment.ANCHOR_SIZE_DOTA)
    height, width = (int(v) for v in _default(args.image_size, "1024x1024").split("x"))

    points = dataset.read_points_csv(args.points) if args.points else []
    boxes = dataset.parse_dota(args.boxes) if args.boxes else []
    labels = sorted({pt.category for _, pt in points} | {b.category for b in boxes})
    if not labels:
        raise SystemExit("no ground truths given (need --points and/or --boxes)")
    label_index = {c: i for i, c in enumerate(labels)}

    targets = [assignment.AssignTarget.from_point((pt.x, pt.y), label_index[pt.category])
               for _, pt in points]
    targets += [assignment.AssignTarget.from_box(b.box, label_index[b.category])
                for b in boxes]

    grid = assignment.AnchorGrid((height, width), anchor_size=anchor_size,
                                 anchors_per_cell=anchors)
    rng = np.random.default_rng(seed)
    centers = grid.anchor_centers()
    scores = rng.uniform(size=(grid.num_anchors, len(labels)))
    result = assignment.assign(grid, centers, scores, targets)

    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("gt_index,kind,label,anchors\n")
            for g, tgt in enumerate(targets):
                ids = " ".join(str(a) for a in result.positives[g])
                fh.write(f"{g},{tgt.kind},{labels[tgt.label]},{ids}\n")
    assigned = sum(len(p) for p in result.positives)
    print(f"assigned {assigned} positive anchors over {len(targets)} ground truths "
          f"({len(result.unassigned_gts)} without positives)")
    return 0


# ---------------------------------------------------------------------------
# eval


def _load_gt_boxes(path) -> list[evaluation.GtBox]:
    path = Path(path)
    files = sorted(path.glob("*.txt")) if path.is_dir() else [path]
    gts = []
    for file in files:
        for rec in dataset.parse_dota(file):
            gts.append(evaluation.GtBox(file.stem, rec.category, rec.box, rec.difficult))
    return gts


def cmd_eval(args) -> int:
    iou = _default(args.iou, 0.5)
    interpolation = _default(args.interpolation, "11point")
    dets = [evaluation.DetectionRecord(image_id, category, score, box)
            for image_id, category, score, box in dataset.read_detections_csv(args.dets)]
    gts = _load_gt_boxes(args.gts)
    result = evaluation.evaluate_map(dets, gts, iou, interpolation)
    print(evaluation.format_table(result))
    print(f"mAP {result.mean_ap:.4f}")
    if args.out:
        evaluation.write_table_csv(args.out, result)
    return 0


# ---------------------------------------------------------------------------
# inspect


_PALETTE = [
    (230, 25, 75), (60, 180, 75), (255, 225, 25), (0, 130, 200), (245, 130, 48),
    (145, 30, 180), (70, 240, 240), (240, 50, 230), (210, 245, 60), (250, 190, 190),
]


def _draw_boxes(image: np.ndarray, items) -> np.ndarray:
    from PIL import Image, ImageDraw

    canvas = Image.fromarray(
        np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8), mode="RGB")
    draw = ImageDraw.Draw(canvas)
    categories = sorted({c for _, c in items})
    colors = {c: _PALETTE[i % len(_PALETTE)] for i, c in enumerate(categories)}
    for box, category in items:
        pts = [tuple(p) for p in box.corners()]
        draw.polygon(pts, outline=colors[category], width=2)
    return np.asarray(canvas, dtype=float) / 255.0


def cmd_inspect(args) -> int:
    image = dataset.load_image(args.image)
    items: list[tuple[RBox, str]] = []
    if args.ann:
        items += [(rec.box, rec.category) for rec in dataset.parse_dota(args.ann)]
    if args.dets:
        items += [(box, category)
                  for _, category, _, box in dataset.read_detections_csv(args.dets)]
    overlay = _draw_boxes(image, items)
    dataset.save_image(args.out, overlay)
    print(f"rendered {len(items)} boxes -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="p2rkit",
        description="toolkit for point-supervised oriented-detection experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key=value options file")
        p.add_argument("--seed", type=int, default=None)
        p.set_defaults(**{k: None for k in _CONFIG_TYPES})

    p = sub.add_parser("synth", help="overlay synthetic patterns on images")
    common(p)
    p.add_argument("--images", required=True, help="directory of .png images")
    p.add_argument("--points", required=True, help="point annotations CSV")
    p.add_argument("--pattern-set", dest="pattern_set", choices=("setrc", "setsk"))
    p.add_argument("--sketch-dir", dest="sketch_dir")
    p.add_argument("--patterns-per-image", dest="patterns_per_image", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("points", help="derive (optionally noisy) point annotations")
    common(p)
    p.add_argument("--gts", required=True, help="directory of DOTA annotation files")
    p.add_argument("--sigma-noise", dest="sigma_noise", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_points)

    p = sub.add_parser("gradcheck", help="verify analytic loss gradients")
    common(p)
    p.add_argument("--trials", type=int)
    p.add_argument("--epsilon", type=float)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("fitdemo", help="gradient-descent consistency demo")
    common(p)
    p.add_argument("--mode", choices=("supervised", "rotate", "flip", "scale"))
    p.add_argument("--out", help="CSV loss trajectory")
    p.set_defaults(func=cmd_fitdemo)

    p = sub.add_parser("split", help="tile a large image into patches")
    common(p)
    p.add_argument("--image", required=True)
    p.add_argument("--ann", help="DOTA annotation file")
    p.add_argument("--patch-size", dest="patch_size", type=int)
    p.add_argument("--overlap", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("merge", help="merge per-patch detections")
    common(p)
    p.add_argument("--dets", required=True, help="per-patch detections CSV")
    p.add_argument("--manifest", required=True, help="patches.json from split")
    p.add_argument("--nms-iou", dest="nms_iou", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("assign", help="run label assignment with seeded scores")
    common(p)
    p.add_argument("--points", help="point annotations CSV")
    p.add_argument("--boxes", help="DOTA file of synthetic boxes")
    p.add_argument("--image-size", dest="image_size", help="HxW, default 1024x1024")
    p.add_argument("--anchors", type=int, choices=(1, 3, 5))
    p.add_argument("--anchor-size", dest="anchor_size", type=int)
    p.add_argument("--out", help="assignment report CSV")
    p.set_defaults(func=cmd_assign)

    p = sub.add_parser("eval", help="rotated-mAP evaluation")
    common(p)
    p.add_argument("--dets", required=True, help="detections CSV")
    p.add_argument("--gts", required=True, help="DOTA annotation file or directory")
    p.add_argument("--iou", type=float)
    p.add_argument("--interpolation", choices=("11point", "auc"))
    p.add_argument("--out", help="per-category CSV table")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("inspect", help="render box overlays")
    common(p)
    p.add_argument("--image", required=True)
    p.add_argument("--ann", help="DOTA annotation file")
    p.add_argument("--dets", help="detections CSV")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args = _apply_config(args)
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
