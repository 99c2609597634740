"""Loss terms for the two-branch training scheme, with analytic gradients.

Every loss here is a pure function of plain floats / numpy arrays. The
`*_grad` companions return the loss value together with its exact
derivatives, and `grad_check` verifies them against central finite
differences away from the (documented) non-smooth points.

Angle residuals are always wrapped into [-pi/2, pi/2) before entering
smooth-L1, so all angle losses are pi-periodic in each argument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import HALF_PI, RBox, normalize_angle

DEFAULT_BETA = 1.0  # smooth-L1 transition point, radians / normalized units

# focal-loss constants for the classification term
FOCAL_ALPHA = 0.25
FOCAL_GAMMA = 2.0

_EPS_PROB = 1e-12


@dataclass(frozen=True)
class LossWeights:
    """Weights of the total loss; the self-supervision weight depends on
    the transform kind (angle-type vs scale-type)."""

    w_cls: float = 1.0
    w_cen: float = 0.1
    w_box: float = 1.0
    w_ss_angle: float = 0.3
    w_ss_scale: float = 0.02

    def __post_init__(self):
        for name in ("w_cls", "w_cen", "w_box", "w_ss_angle", "w_ss_scale"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def w_ss(self, transform_kind: str) -> float:
        return self.w_ss_scale if transform_kind == "scale" else self.w_ss_angle


@dataclass
class BranchPrediction:
    """Per-anchor outputs of one branch plus its assignment masks.

    boxes: (n, 5) array of (x, y, w, h, theta); class_scores: (n, C)
    probabilities; m_point / m_box: disjoint boolean masks over anchors;
    matched_gt: per-anchor index into the point list (m_point anchors) or
    the synthetic-box list (m_box anchors), -1 for background.
    """

    boxes: np.ndarray
    class_scores: np.ndarray
    m_point: np.ndarray
    m_box: np.ndarray
    matched_gt: np.ndarray
    branch: str = "original"

    def __post_init__(self):
        self.boxes = np.asarray(self.boxes, dtype=float).reshape(-1, 5)
        self.class_scores = np.asarray(self.class_scores, dtype=float)
        self.m_point = np.asarray(self.m_point, dtype=bool)
        self.m_box = np.asarray(self.m_box, dtype=bool)
        self.matched_gt = np.asarray(self.matched_gt, dtype=int)
        if np.any(self.m_point & self.m_box):
            raise ValueError("m_point and m_box must be disjoint")
        if self.class_scores.size and (
            self.class_scores.min() < 0 or self.class_scores.max() > 1
        ):
            raise ValueError("class scores must lie in [0, 1]")
        if self.branch not in ("original", "transformed"):
            raise ValueError(f"unknown branch tag {self.branch!r}")


@dataclass
class PointLoss:
    l_cls: float
    l_cen: float
    count: int


# ---------------------------------------------------------------------------
# scalar building blocks


def smooth_l1(x: float, target: float = 0.0, beta: float = DEFAULT_BETA) -> float:
    """0.5 (x-t)^2 / beta inside |x-t| < beta, |x-t| - 0.5 beta outside."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    r = x - target
    if abs(r) < beta:
        return 0.5 * r * r / beta
    return abs(r) - 0.5 * beta


def smooth_l1_grad(x: float, target: float = 0.0, beta: float = DEFAULT_BETA) -> float:
    """d smooth_l1 / dx."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    r = x - target
    if abs(r) < beta:
        return r / beta
    return math.copysign(1.0, r)


def loss_flip(theta_ori: float, theta_trs: float, beta: float = DEFAULT_BETA) -> float:
    """Zero iff theta_trs == -theta_ori (mod pi)."""
    return smooth_l1(normalize_angle(theta_trs + theta_ori), 0.0, beta)


def loss_flip_grad(theta_ori: float, theta_trs: float, beta: float = DEFAULT_BETA):
    r = normalize_angle(theta_trs + theta_ori)
    g = smooth_l1_grad(r, 0.0, beta)
    return smooth_l1(r, 0.0, beta), g, g


def loss_rotate(theta_ori: float, theta_trs: float, rotation: float,
                beta: float = DEFAULT_BETA) -> float:
    """Zero iff theta_trs == theta_ori + rotation (mod pi).

    The residual is wrapped again after subtracting the rotation so that
    rotations near +-pi/2 cannot create spurious large residuals.
    """
    r = normalize_angle(normalize_angle(theta_trs - theta_ori) - rotation)
    return smooth_l1(r, 0.0, beta)


def loss_rotate_grad(theta_ori: float, theta_trs: float, rotation: float,
                     beta: float = DEFAULT_BETA):
    r = normalize_angle(normalize_angle(theta_trs - theta_ori) - rotation)
    g = smooth_l1_grad(r, 0.0, beta)
    return smooth_l1(r, 0.0, beta), -g, g


def loss_scale(box_ori: RBox, box_trs: RBox, factor: float) -> float:
    """1 - GIoU between the scaled circumscribed HBox of the original box
    and the circumscribed HBox of the transformed box; zero iff they
    coincide."""
    value, _, _ = _scale_consistency_terms(box_ori.as_array(), box_trs.as_array(), factor)
    return value


def loss_scale_grad(box_ori: RBox, box_trs: RBox, factor: float):
    """(value, d/d box_ori params, d/d box_trs params), each grad shape (5,)."""
    return _scale_consistency_terms(box_ori.as_array(), box_trs.as_array(), factor)


def _scale_consistency_terms(p_ori: np.ndarray, p_trs: np.ndarray, factor: float):
    """loss_scale on raw 5-vectors with gradients (used by the fit demo)."""
    ha, da = _hbox_from_params(p_ori)
    hb, db = _hbox_from_params(p_trs)
    ha = [v * factor for v in ha]
    da = da * factor
    value, ga, gb = _giou_value_and_grads(ha, hb)
    # loss = 1 - giou
    grad_ori = -(da.T @ ga)
    grad_trs = -(db.T @ gb)
    return 1.0 - value, grad_ori, grad_trs


def _hbox_from_params(p: np.ndarray):
    """Circumscribed HBox of (x, y, w, h, theta) and its (4, 5) Jacobian."""
    x, y, w, h, t = p
    c, s = math.cos(t), math.sin(t)
    ac, asn = abs(c), abs(s)
    ex = 0.5 * (w * ac + h * asn)
    ey = 0.5 * (w * asn + h * ac)
    # d|cos|/dt = -sign(cos) sin, d|sin|/dt = sign(sin) cos
    dac = -math.copysign(1.0, c) * s if c != 0 else 0.0
    dasn = math.copysign(1.0, s) * c if s != 0 else 0.0
    dex = 0.5 * (w * dac + h * dasn)
    dey = 0.5 * (w * dasn + h * dac)
    corners = [x - ex, y - ey, x + ex, y + ey]
    jac = np.array([
        #  x    y      w           h           theta
        [1.0, 0.0, -0.5 * ac, -0.5 * asn, -dex],
        [0.0, 1.0, -0.5 * asn, -0.5 * ac, -dey],
        [1.0, 0.0, 0.5 * ac, 0.5 * asn, dex],
        [0.0, 1.0, 0.5 * asn, 0.5 * ac, dey],
    ])
    return corners, jac


def _giou_value_and_grads(a, b):
    """GIoU of two hboxes given as [x0, y0, x1, y1], with d/da and d/db.

    Piecewise smooth; at min/max ties the active branch is the one the
    forward pass picks, matching the subgradient convention used by
    `grad_check`'s kink rejection.
    """
    ax0, ay0, ax1, ay1 = a
    bx0, by0, bx1, by1 = b
    area_a = (ax1 - ax0) * (ay1 - ay0)
    area_b = (bx1 - bx0) * (by1 - by0)
    if area_a < 1e-12 and area_b < 1e-12:
        raise ValueError("GIoU undefined for two degenerate boxes")
    ga = np.zeros(4)
    gb = np.zeros(4)

    ix0, ix0_is_a = (ax0, True) if ax0 >= bx0 else (bx0, False)
    iy0, iy0_is_a = (ay0, True) if ay0 >= by0 else (by0, False)
    ix1, ix1_is_a = (ax1, True) if ax1 <= bx1 else (bx1, False)
    iy1, iy1_is_a = (ay1, True) if ay1 <= by1 else (by1, False)
    iw, ih = ix1 - ix0, iy1 - iy0
    inter = max(0.0, iw) * max(0.0, ih)

    d_inter_a = np.zeros(4)
    d_inter_b = np.zeros(4)
    if iw > 0 and ih > 0:
        (d_inter_a if ix0_is_a else d_inter_b)[0] += -ih
        (d_inter_a if iy0_is_a else d_inter_b)[1] += -iw
        (d_inter_a if ix1_is_a else d_inter_b)[2] += ih
        (d_inter_a if iy1_is_a else d_inter_b)[3] += iw

    d_area_a = np.array([-(ay1 - ay0), -(ax1 - ax0), (ay1 - ay0), (ax1 - ax0)])
    d_area_b = np.array([-(by1 - by0), -(bx1 - bx0), (by1 - by0), (bx1 - bx0)])

    union = area_a + area_b - inter
    d_union_a = d_area_a - d_inter_a
    d_union_b = d_area_b - d_inter_b

    cx0_is_a = ax0 <= bx0
    cy0_is_a = ay0 <= by0
    cx1_is_a = ax1 >= bx1
    cy1_is_a = ay1 >= by1
    cw = max(ax1, bx1) - min(ax0, bx0)
    ch = max(ay1, by1) - min(ay0, by0)
    enclosing = cw * ch
    d_enc_a = np.zeros(4)
    d_enc_b = np.zeros(4)
    (d_enc_a if cx0_is_a else d_enc_b)[0] += -ch
    (d_enc_a if cy0_is_a else d_enc_b)[1] += -cw
    (d_enc_a if cx1_is_a else d_enc_b)[2] += ch
    (d_enc_a if cy1_is_a else d_enc_b)[3] += cw

    if union > 0:
        iou = inter / union
        d_iou_a = (d_inter_a * union - inter * d_union_a) / union**2
        d_iou_b = (d_inter_b * union - inter * d_union_b) / union**2
    else:
        iou = 0.0
        d_iou_a = d_iou_b = np.zeros(4)

    # penalty = (enclosing - union) / enclosing
    pen_num = enclosing - union
    d_pen_a = ((d_enc_a - d_union_a) * enclosing - pen_num * d_enc_a) / enclosing**2
    d_pen_b = ((d_enc_b - d_union_b) * enclosing - pen_num * d_enc_b) / enclosing**2

    ga = d_iou_a - d_pen_a
    gb = d_iou_b - d_pen_b
    return iou - pen_num / enclosing, ga, gb


# ---------------------------------------------------------------------------
# box regression


def rbox_regression_loss(pred: np.ndarray, target: np.ndarray,
                         beta: float = DEFAULT_BETA, angle_weight: float = 1.0) -> float:
    """Per-pair regression loss: smooth-L1 on the normalized center
    offsets and log size ratios, plus a wrapped-angle smooth-L1 term."""
    value, _ = rbox_regression_grad(pred, target, beta, angle_weight)
    return value


def rbox_regression_grad(pred: np.ndarray, target: np.ndarray,
                         beta: float = DEFAULT_BETA, angle_weight: float = 1.0):
    """(value, d value / d pred params). `pred`, `target` are 5-vectors."""
    px, py, pw, ph, pt = (float(v) for v in pred)
    gx, gy, gw, gh, gt = (float(v) for v in target)
    if pw <= 0 or ph <= 0 or gw <= 0 or gh <= 0:
        raise ValueError("box extents must be positive")
    grad = np.zeros(5)

    dx = (px - gx) / gw
    dy = (py - gy) / gh
    dw = math.log(pw / gw)
    dh = math.log(ph / gh)
    dt = normalize_angle(pt - gt)

    value = smooth_l1(dx, 0.0, beta) + smooth_l1(dy, 0.0, beta)
    value += smooth_l1(dw, 0.0, beta) + smooth_l1(dh, 0.0, beta)
    value += angle_weight * smooth_l1(dt, 0.0, beta)

    grad[0] = smooth_l1_grad(dx, 0.0, beta) / gw
    grad[1] = smooth_l1_grad(dy, 0.0, beta) / gh
    grad[2] = smooth_l1_grad(dw, 0.0, beta) / pw
    grad[3] = smooth_l1_grad(dh, 0.0, beta) / ph
    grad[4] = angle_weight * smooth_l1_grad(dt, 0.0, beta)
    return value, grad


# ---------------------------------------------------------------------------
# masked losses over branch predictions


def focal_loss(scores: np.ndarray, label: int,
               alpha: float = FOCAL_ALPHA, gamma: float = FOCAL_GAMMA) -> float:
    """Per-anchor focal classification loss over per-class probabilities,
    treating each class as an independent binary target."""
    p = np.clip(np.asarray(scores, dtype=float), _EPS_PROB, 1.0 - _EPS_PROB)
    total = 0.0
    for c, pc in enumerate(p):
        if c == label:
            total += -alpha * (1.0 - pc) ** gamma * math.log(pc)
        else:
            total += -(1.0 - alpha) * pc**gamma * math.log(1.0 - pc)
    return total


def loss_point(pred: BranchPrediction, gt_points) -> PointLoss:
    """Classification (focal) and center (L1) losses over the anchors
    assigned to annotated points.

    gt_points: sequence of ((x, y), label). The center term is the mean
    absolute error over all selected coordinates (per-coordinate mean).
    """
    idx = np.flatnonzero(pred.m_point)
    if idx.size == 0:
        return PointLoss(0.0, 0.0, 0)
    l_cls = 0.0
    abs_errs = []
    for i in idx:
        (gx, gy), label = gt_points[pred.matched_gt[i]]
        l_cls += focal_loss(pred.class_scores[i], label)
        abs_errs.append(abs(pred.boxes[i, 0] - gx))
        abs_errs.append(abs(pred.boxes[i, 1] - gy))
    return PointLoss(l_cls / idx.size, float(np.mean(abs_errs)), int(idx.size))


def loss_box(pred: BranchPrediction, gt_boxes,
             beta: float = DEFAULT_BETA, angle_weight: float = 1.0) -> float:
    """Mean regression loss over anchors assigned to synthetic boxes.

    gt_boxes: sequence of (RBox, label) pairs.
    """
    idx = np.flatnonzero(pred.m_box)
    if idx.size == 0:
        return 0.0
    total = 0.0
    for i in idx:
        target, _ = gt_boxes[pred.matched_gt[i]]
        total += rbox_regression_loss(pred.boxes[i], target.as_array(), beta, angle_weight)
    return total / idx.size


def loss_ss(pred_ori: BranchPrediction, pred_trs: BranchPrediction, t) -> float:
    """Transform self-supervision between the two branches.

    Only boxes assigned to real (point-annotated) objects participate;
    the two selections must be index-aligned over the same objects.
    """
    idx_ori = np.flatnonzero(pred_ori.m_point)
    idx_trs = np.flatnonzero(pred_trs.m_point)
    if idx_ori.size != idx_trs.size:
        raise ValueError(
            f"misaligned self-supervision pairing: {idx_ori.size} vs {idx_trs.size} boxes"
        )
    if idx_ori.size == 0:
        return 0.0
    if np.any(pred_ori.matched_gt[idx_ori] != pred_trs.matched_gt[idx_trs]):
        raise ValueError("paired selections reference different objects")
    total = 0.0
    for i, j in zip(idx_ori, idx_trs):
        bo, bt = pred_ori.boxes[i], pred_trs.boxes[j]
        if t.kind == "flip":
            total += loss_flip(bo[4], bt[4])
        elif t.kind == "rotate":
            total += loss_rotate(bo[4], bt[4], t.angle)
        else:
            total += loss_scale(RBox.from_array(bo), RBox.from_array(bt), t.factor)
    return total / idx_ori.size


def total_loss(l_cls: float, l_cen: float, l_box: float, l_ss: float,
               transform_kind: str, weights: LossWeights = LossWeights()) -> float:
    """Weighted sum of the four terms; the self-supervision weight is
    selected by the transform kind."""
    return (weights.w_cls * l_cls + weights.w_cen * l_cen
            + weights.w_box * l_box + weights.w_ss(transform_kind) * l_ss)


# ---------------------------------------------------------------------------
# finite-difference verification


class KinkError(ValueError):
    """Raised when a gradient check is requested at a non-smooth point."""


@dataclass
class _CheckedLoss:
    value: callable          # params -> float
    grad: callable           # params -> np.ndarray
    kink_distance: callable  # params -> float (distance to nearest kink)


def _wrap_distance(r: float) -> float:
    """Distance of a wrapped residual from the +-pi/2 discontinuity."""
    return (math.pi / 2) - abs(r)


def _smooth_l1_kinks(r: float, beta: float) -> float:
    return abs(abs(r) - beta)


def _build_registry():
    def sl1_value(p, beta=DEFAULT_BETA):
        return smooth_l1(p[0], 0.0, beta)

    def sl1_grad(p, beta=DEFAULT_BETA):
        return np.array([smooth_l1_grad(p[0], 0.0, beta)])

    def sl1_kink(p, beta=DEFAULT_BETA):
        return _smooth_l1_kinks(p[0], beta)

    def flip_value(p, beta=DEFAULT_BETA):
        return loss_flip(p[0], p[1], beta)

    def flip_grad(p, beta=DEFAULT_BETA):
        _, g0, g1 = loss_flip_grad(p[0], p[1], beta)
        return np.array([g0, g1])

    def flip_kink(p, beta=DEFAULT_BETA):
        r = normalize_angle(p[1] + p[0])
        return min(_wrap_distance(r), _smooth_l1_kinks(r, beta))

    def rot_value(p, rotation=0.0, beta=DEFAULT_BETA):
        return loss_rotate(p[0], p[1], rotation, beta)

    def rot_grad(p, rotation=0.0, beta=DEFAULT_BETA):
        _, g0, g1 = loss_rotate_grad(p[0], p[1], rotation, beta)
        return np.array([g0, g1])

    def rot_kink(p, rotation=0.0, beta=DEFAULT_BETA):
        r = normalize_angle(normalize_angle(p[1] - p[0]) - rotation)
        return min(_wrap_distance(r), _smooth_l1_kinks(r, beta))

    def scale_value(p, factor=1.0):
        v, _, _ = _scale_consistency_terms(p[:5], p[5:], factor)
        return v

    def scale_grad(p, factor=1.0):
        _, ga, gb = _scale_consistency_terms(p[:5], p[5:], factor)
        return np.concatenate([ga, gb])

    def scale_kink(p, factor=1.0):
        return _scale_kink_distance(p[:5], p[5:], factor)

    def box_value(p, target=None, beta=DEFAULT_BETA, angle_weight=1.0):
        v, _ = rbox_regression_grad(p, np.asarray(target), beta, angle_weight)
        return v

    def box_grad(p, target=None, beta=DEFAULT_BETA, angle_weight=1.0):
        _, g = rbox_regression_grad(p, np.asarray(target), beta, angle_weight)
        return g

    def box_kink(p, target=None, beta=DEFAULT_BETA, angle_weight=1.0):
        px, py, pw, ph, pt = p
        gx, gy, gw, gh, gt = target
        residuals = [(px - gx) / gw, (py - gy) / gh,
                     math.log(pw / gw), math.log(ph / gh)]
        dt = normalize_angle(pt - gt)
        dists = [_smooth_l1_kinks(r, beta) for r in residuals]
        dists.append(_smooth_l1_kinks(dt, beta))
        dists.append(_wrap_distance(dt))
        return min(dists)

    return {
        "smooth_l1": _CheckedLoss(sl1_value, sl1_grad, sl1_kink),
        "loss_flip": _CheckedLoss(flip_value, flip_grad, flip_kink),
        "loss_rotate": _CheckedLoss(rot_value, rot_grad, rot_kink),
        "loss_scale": _CheckedLoss(scale_value, scale_grad, scale_kink),
        "loss_box": _CheckedLoss(box_value, box_grad, box_kink),
    }


def _scale_kink_distance(p_ori, p_trs, factor: float) -> float:
    """Distance (in parameter units) to the nearest non-smooth point of
    the scale-consistency loss: angle axis alignments, interval-endpoint
    ties of the GIoU min/max terms, and intersection-edge sign changes.

    Corner-space distances are divided by the corners' Lipschitz constant
    with respect to the parameters (theta moves a corner by up to
    (w + h) / 2 per radian), so the result is comparable to a direct
    parameter perturbation.
    """
    dists = [
        min(abs(normalize_angle(t)), _wrap_distance(normalize_angle(t)))
        for t in (p_ori[4], p_trs[4])
    ]
    ca, _ = _hbox_from_params(np.asarray(p_ori, dtype=float))
    cb, _ = _hbox_from_params(np.asarray(p_trs, dtype=float))
    ca = [v * factor for v in ca]
    lip = max(1.0,
              0.5 * (abs(p_ori[2]) + abs(p_ori[3])) * factor,
              0.5 * (abs(p_trs[2]) + abs(p_trs[3])))
    corner_dists = [abs(ca[i] - cb[i]) for i in range(4)]
    iw = min(ca[2], cb[2]) - max(ca[0], cb[0])
    ih = min(ca[3], cb[3]) - max(ca[1], cb[1])
    corner_dists.extend([abs(iw), abs(ih)])
    dists.extend(d / lip for d in corner_dists)
    return min(dists)


_REGISTRY = _build_registry()


def sample_smooth_params(loss_name: str, rng: np.random.Generator,
                         epsilon: float = 1e-5, max_tries: int = 200):
    """Draw a random evaluation point for `grad_check`, resampling until
    it is comfortably away from every kink. Returns (params, fixed)."""
    entry = _REGISTRY.get(loss_name)
    if entry is None:
        raise KeyError(f"unknown loss {loss_name!r}; have {sorted(_REGISTRY)}")
    for _ in range(max_tries):
        if loss_name == "smooth_l1":
            params, fixed = np.array([rng.uniform(-3.0, 3.0)]), {}
        elif loss_name == "loss_flip":
            params, fixed = rng.uniform(-HALF_PI, HALF_PI, size=2), {}
        elif loss_name == "loss_rotate":
            params = rng.uniform(-HALF_PI, HALF_PI, size=2)
            fixed = {"rotation": float(rng.uniform(0.25 * math.pi, 0.75 * math.pi))}
        elif loss_name == "loss_scale":
            params = np.concatenate([_random_box(rng), _random_box(rng)])
            fixed = {"factor": float(rng.uniform(0.5, 1.5))}
        else:  # loss_box
            target = _random_box(rng)
            pred = target.copy()
            pred[0] += rng.uniform(-1.5, 1.5) * target[2]
            pred[1] += rng.uniform(-1.5, 1.5) * target[3]
            pred[2] *= math.exp(rng.uniform(-1.5, 1.5))
            pred[3] *= math.exp(rng.uniform(-1.5, 1.5))
            pred[4] = rng.uniform(-HALF_PI, HALF_PI)
            params, fixed = pred, {"target": target}
        if entry.kink_distance(params, **fixed) >= 20 * epsilon:
            return params, fixed
    raise RuntimeError(f"could not sample a smooth point for {loss_name}")


def _random_box(rng: np.random.Generator) -> np.ndarray:
    return np.array([
        rng.uniform(0.0, 60.0),
        rng.uniform(0.0, 60.0),
        rng.uniform(5.0, 40.0),
        rng.uniform(5.0, 40.0),
        rng.uniform(-HALF_PI, HALF_PI),
    ])


def grad_check(loss_name: str, params: np.ndarray, epsilon: float = 1e-5,
               **fixed) -> float:
    """Max relative error between analytic and central-difference
    gradients: max_i |analytic_i - numeric_i| / max(1, |numeric_i|).

    Rejects evaluation points closer than 10 * epsilon to a kink.
    """
    if loss_name not in _REGISTRY:
        raise KeyError(f"unknown loss {loss_name!r}; have {sorted(_REGISTRY)}")
    entry = _REGISTRY[loss_name]
    params = np.asarray(params, dtype=float)
    kink = entry.kink_distance(params, **fixed)
    if kink < 10 * epsilon:
        raise KinkError(
            f"{loss_name} is non-smooth within {kink:.2e} of the evaluation "
            f"point (need >= {10 * epsilon:.2e}); move the point or shrink epsilon"
        )
    analytic = entry.grad(params, **fixed)
    worst = 0.0
    for i in range(params.size):
        shift = np.zeros_like(params)
        shift[i] = epsilon
        numeric = (entry.value(params + shift, **fixed)
                   - entry.value(params - shift, **fixed)) / (2 * epsilon)
        err = abs(analytic[i] - numeric) / max(1.0, abs(numeric))
        worst = max(worst, err)
    return worst
