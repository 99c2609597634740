"""View transforms for the two-branch consistency scheme, plus a
desk-scale fitting demo.

A transform (vertical flip, rotation about the image center, or uniform
scaling) is applied to the input image and its annotations; the
consistency losses then force a pair of independently parameterized
per-object boxes to reproduce that transform. The demo optimizes the
free box parameters of both branches by gradient descent (Adam updates)
on the combined loss, standing in for the two parameter-shared network
branches at desk scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import RBox, TransformSpec, normalize_angle, transform_rbox
from .losses import (
    LossWeights,
    loss_flip_grad,
    loss_rotate_grad,
    rbox_regression_grad,
    _scale_consistency_terms,
)

SCALE_PROB = 0.30
ROTATE_FLIP_RATIO = 0.95  # rotate share of the non-scale mass
ROTATION_RANGE = (0.25 * math.pi, 0.75 * math.pi)
SCALE_RANGE = (0.5, 1.5)


def sample_transform(rng: np.random.Generator) -> TransformSpec:
    """Draw a transform: scale with probability 0.30, the remainder split
    rotate:flip = 95:5; rotation uniform in (0.25 pi, 0.75 pi), scale
    factor uniform in (0.5, 1.5)."""
    u = rng.random()
    if u < SCALE_PROB:
        return TransformSpec("scale", factor=float(rng.uniform(*SCALE_RANGE)))
    if u < SCALE_PROB + (1.0 - SCALE_PROB) * ROTATE_FLIP_RATIO:
        return TransformSpec("rotate", angle=float(rng.uniform(*ROTATION_RANGE)))
    return TransformSpec("flip")


def apply_transform(image: np.ndarray, annotations, t: TransformSpec):
    """Transform an image and its box annotations consistently.

    Flip mirrors rows; rotation resamples bilinearly about the image
    center on the same canvas (conceptually expand-then-center-crop) with
    the image mean color as fill; scaling resizes the canvas. Annotation
    boxes are mapped exactly by `transform_rbox`.

    annotations: sequence of (RBox, label). Returns (image, annotations).
    """
    image = np.asarray(image, dtype=float)
    size = image.shape[:2]
    boxes = [(transform_rbox(b, t, size), label) for b, label in annotations]
    if t.kind == "flip":
        return image[::-1].copy(), boxes
    if t.kind == "rotate":
        return _rotate_image(image, t.angle), boxes
    h, w = size
    out_h, out_w = max(1, round(h * t.factor)), max(1, round(w * t.factor))
    return _resize_image(image, out_h, out_w), boxes


def _rotate_image(image: np.ndarray, angle: float) -> np.ndarray:
    h, w = image.shape[:2]
    cy, cx = h / 2.0, w / 2.0
    c, s = math.cos(angle), math.sin(angle)
    xs = (np.arange(w) + 0.5)[None, :] - cx
    ys = (np.arange(h) + 0.5)[:, None] - cy
    # inverse map: rotate output pixel centers back by -angle
    src_x = cx + xs * c + ys * s
    src_y = cy - xs * s + ys * c
    fill = image.reshape(-1, image.shape[2]).mean(axis=0)
    valid = (src_x >= 0) & (src_x <= w) & (src_y >= 0) & (src_y <= h)
    xi = np.clip(src_x - 0.5, 0, w - 1)
    yi = np.clip(src_y - 0.5, 0, h - 1)
    out = _bilinear(image, xi, yi)
    out[~valid] = fill
    return out


def _resize_image(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    h, w = image.shape[:2]
    xi = np.clip((np.arange(out_w) + 0.5) * w / out_w - 0.5, 0, w - 1)
    yi = np.clip((np.arange(out_h) + 0.5) * h / out_h - 0.5, 0, h - 1)
    return _bilinear(image, xi[None, :].repeat(out_h, 0), yi[:, None].repeat(out_w, 1))


def _bilinear(img: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    x0 = np.floor(x).astype(int)
    y0 = np.floor(y).astype(int)
    x1 = np.minimum(x0 + 1, img.shape[1] - 1)
    y1 = np.minimum(y0 + 1, img.shape[0] - 1)
    fx = (x - x0)[..., None]
    fy = (y - y0)[..., None]
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    return top * (1 - fy) + bot * fy


# ---------------------------------------------------------------------------
# fitting demo


class FitDivergedError(RuntimeError):
    """Raised when the demo loss keeps increasing; carries diagnostics."""

    def __init__(self, message: str, losses):
        super().__init__(message)
        self.losses = list(losses)


@dataclass
class FitProblem:
    """Free per-object box parameters for both branches.

    initial: (2, n, 5) array, branch 0 = original view, branch 1 =
    transformed view. targets[i] supervises object i with a known box in
    the original frame (the transformed branch is supervised by the
    transformed box); objects with target None are real objects and
    participate in transform self-supervision instead.
    """

    initial: np.ndarray
    targets: list[RBox | None]
    transform: TransformSpec
    image_size: tuple[int, int] = (512, 512)
    step_size: float = 0.01
    decay_every: int = 200
    decay_factor: float = 0.5
    max_iters: int = 2000
    weights: LossWeights = field(default_factory=LossWeights)

    def __post_init__(self):
        self.initial = np.asarray(self.initial, dtype=float)
        n = len(self.targets)
        if self.initial.shape != (2, n, 5):
            raise ValueError(f"initial must be (2, {n}, 5), got {self.initial.shape}")


@dataclass
class FitResult:
    params: np.ndarray  # (2, n, 5) final parameters
    losses: list[float]  # per-iteration total loss
    iterations: int
    converged_at_zero: bool  # stopped early at an exactly-consistent point


# optimization is declared converged once the loss is numerically zero
# (exact consistency is a stationary point and must not move)
_ZERO_LOSS = 1e-24
_DIVERGENCE_PATIENCE = 50


def _demo_loss_and_grad(params: np.ndarray, problem: FitProblem):
    """Total demo loss (w_box * L_box + w_ss * L_ss) and its gradient."""
    t = problem.transform
    weights = problem.weights
    grad = np.zeros_like(params)

    box_terms = []
    ss_terms = []
    supervised = [(i, tgt) for i, tgt in enumerate(problem.targets) if tgt is not None]
    free = [i for i, tgt in enumerate(problem.targets) if tgt is None]

    box_pairs = []
    for i, tgt in supervised:
        box_pairs.append((0, i, tgt.as_array()))
        box_pairs.append((1, i, transform_rbox(tgt, t, problem.image_size).as_array()))
    if box_pairs:
        scale = 1.0 / len(box_pairs)
        for branch, i, target in box_pairs:
            value, g = rbox_regression_grad(params[branch, i], target)
            box_terms.append(value)
            grad[branch, i] += weights.w_box * scale * g

    if free:
        scale = 1.0 / len(free)
        w_ss = weights.w_ss(t.kind)
        for i in free:
            if t.kind == "flip":
                value, g_ori, g_trs = loss_flip_grad(params[0, i, 4], params[1, i, 4])
                grad[0, i, 4] += w_ss * scale * g_ori
                grad[1, i, 4] += w_ss * scale * g_trs
            elif t.kind == "rotate":
                value, g_ori, g_trs = loss_rotate_grad(params[0, i, 4], params[1, i, 4],
                                                       t.angle)
                grad[0, i, 4] += w_ss * scale * g_ori
                grad[1, i, 4] += w_ss * scale * g_trs
            else:
                value, g_ori, g_trs = _scale_consistency_terms(params[0, i], params[1, i],
                                                               t.factor)
                grad[0, i] += w_ss * scale * g_ori
                grad[1, i] += w_ss * scale * g_trs
            ss_terms.append(value)

    l_box = float(np.mean(box_terms)) if box_terms else 0.0
    l_ss = float(np.mean(ss_terms)) if ss_terms else 0.0
    total = weights.w_box * l_box + weights.w_ss(t.kind) * l_ss
    return total, grad


def fit_demo(problem: FitProblem) -> FitResult:
    """Drive the free box parameters to transform-consistency (and to the
    supervised targets) by Adam gradient descent with a stepwise-decayed
    learning rate. Aborts with FitDivergedError if the loss increases
    over 50 consecutive iterations.
    """
    params = problem.initial.copy()
    m = np.zeros_like(params)
    v = np.zeros_like(params)
    # short second-moment horizon: the demo gradients shrink geometrically
    # near the optimum, and a long v-memory would stall the final approach
    beta1, beta2, eps = 0.9, 0.99, 1e-8
    losses: list[float] = []
    rising = 0
    for it in range(problem.max_iters):
        lr = problem.step_size * problem.decay_factor ** (it // problem.decay_every)
        try:
            loss, grad = _demo_loss_and_grad(params, problem)
        except ValueError as exc:
            raise FitDivergedError(
                f"parameters left the valid domain at iteration {it}: {exc}",
                losses) from exc
        losses.append(loss)
        if loss <= _ZERO_LOSS:
            return FitResult(params, losses, it, True)
        if len(losses) >= 2 and losses[-1] > losses[-2]:
            rising += 1
            if rising >= _DIVERGENCE_PATIENCE:
                raise FitDivergedError(
                    f"loss rose for {rising} consecutive iterations "
                    f"(last {losses[-1]:.3e} at iteration {it})", losses)
        else:
            rising = 0
        m = beta1 * m + (1 - beta1) * grad
        v = beta2 * v + (1 - beta2) * grad * grad
        m_hat = m / (1 - beta1 ** (it + 1))
        v_hat = v / (1 - beta2 ** (it + 1))
        params -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return FitResult(params, losses, problem.max_iters, False)


def make_demo_problem(mode: str, rng: np.random.Generator,
                      num_objects: int = 3) -> FitProblem:
    """Canned fitting problems for the CLI and tests.

    "supervised": every object has a synthetic-box target and both
    branches start near their (transformed) targets. "rotate" / "flip" /
    "scale": free objects whose transformed branch starts off-consistent,
    driven purely by the matching self-supervision loss.
    """
    size = (512, 512)
    if mode == "supervised":
        t = TransformSpec("rotate", angle=float(rng.uniform(*ROTATION_RANGE)))
        targets = [_random_demo_box(rng) for _ in range(num_objects)]
        initial = np.zeros((2, num_objects, 5))
        for i, tgt in enumerate(targets):
            initial[0, i] = _perturb(tgt.as_array(), rng)
            initial[1, i] = _perturb(transform_rbox(tgt, t, size).as_array(), rng)
        return FitProblem(initial, list(targets), t, size)
    if mode == "rotate":
        t = TransformSpec("rotate", angle=float(rng.uniform(*ROTATION_RANGE)))
    elif mode == "flip":
        t = TransformSpec("flip")
    elif mode == "scale":
        t = TransformSpec("scale", factor=float(rng.uniform(*SCALE_RANGE)))
    else:
        raise ValueError(f"unknown demo mode {mode!r}")
    initial = np.zeros((2, num_objects, 5))
    for i in range(num_objects):
        box = _random_demo_box(rng)
        initial[0, i] = box.as_array()
        trs = transform_rbox(box, t, size).as_array()
        if t.kind == "scale":
            trs = _perturb(trs, rng)
        else:
            trs[4] = normalize_angle(trs[4] + rng.uniform(-0.3, 0.3))
        initial[1, i] = trs
    return FitProblem(initial, [None] * num_objects, t, size)


def _random_demo_box(rng: np.random.Generator) -> RBox:
    return RBox(float(rng.uniform(120, 392)), float(rng.uniform(120, 392)),
                float(rng.uniform(20, 80)), float(rng.uniform(20, 80)),
                float(rng.uniform(-math.pi / 2, math.pi / 2)))


def _perturb(params: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Offset box parameters within the demo optimizer's reach (total
    step budget under the default decayed schedule is about 4 units per
    parameter): a couple of pixels in position, a few percent in size,
    ~0.2 rad in angle."""
    out = params.copy()
    out[0] += rng.uniform(-1.5, 1.5)
    out[1] += rng.uniform(-1.5, 1.5)
    out[2] *= math.exp(rng.uniform(-0.03, 0.03))
    out[3] *= math.exp(rng.uniform(-0.03, 0.03))
    out[4] = normalize_angle(out[4] + rng.uniform(-0.2, 0.2))
    return out


def parameter_errors(result: FitResult, problem: FitProblem) -> np.ndarray:
    """(2, n, 5) absolute errors of the supervised objects' parameters
    against their (transformed) targets; the angle error is wrapped,
    since theta and theta + pi describe the same box. Free objects get
    NaN rows."""
    errors = np.full_like(result.params, np.nan)
    for i, tgt in enumerate(problem.targets):
        if tgt is None:
            continue
        for branch, reference in (
            (0, tgt.as_array()),
            (1, transform_rbox(tgt, problem.transform, problem.image_size).as_array()),
        ):
            diff = np.abs(result.params[branch, i] - reference)
            diff[4] = abs(normalize_angle(result.params[branch, i, 4] - reference[4]))
            errors[branch, i] = diff
    return errors


def rotation_residual(result: FitResult, problem: FitProblem) -> np.ndarray:
    """Per-object |mod(theta_trs - theta_ori) - R| after fitting."""
    if problem.transform.kind != "rotate":
        raise ValueError("rotation residual only defined for rotate transforms")
    res = []
    for i in range(result.params.shape[1]):
        d = normalize_angle(result.params[1, i, 4] - result.params[0, i, 4])
        res.append(abs(normalize_angle(d - problem.transform.angle)))
    return np.array(res)


def write_loss_trajectory(path, losses) -> None:
    """CSV trajectory `iteration,loss`, consumable by the CLI plotter."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("iteration,loss\n")
        for i, value in enumerate(losses):
            fh.write(f"{i},{value:.12g}\n")
