import math

import numpy as np
import pytest

from p2rkit.geometry import RBox, TransformSpec, transform_rbox
from p2rkit.losses import (
    BranchPrediction,
    KinkError,
    LossWeights,
    focal_loss,
    grad_check,
    loss_box,
    loss_flip,
    loss_flip_grad,
    loss_point,
    loss_rotate,
    loss_scale,
    loss_ss,
    rbox_regression_loss,
    sample_smooth_params,
    smooth_l1,
    smooth_l1_grad,
    total_loss,
)

IMAGE = (512, 512)


def random_box(rng, lo=4.0, hi=200.0):
    return RBox(float(rng.uniform(0, 500)), float(rng.uniform(0, 500)),
                float(rng.uniform(lo, hi)), float(rng.uniform(lo, hi)),
                float(rng.uniform(-math.pi / 2, math.pi / 2)))


class TestSmoothL1:
    def test_quadratic_branch(self):
        assert smooth_l1(0.5, 0, 1) == pytest.approx(0.125)

    def test_linear_branch(self):
        assert smooth_l1(2, 0, 1) == pytest.approx(1.5)

    def test_identity(self):
        assert smooth_l1(0.37, 0.37, 0.8) == 0.0

    def test_gradients(self):
        assert smooth_l1_grad(0.5, 0, 1) == pytest.approx(0.5)
        assert smooth_l1_grad(2, 0, 1) == 1.0
        assert smooth_l1_grad(-2, 0, 1) == -1.0

    def test_beta_validated(self):
        with pytest.raises(ValueError):
            smooth_l1(1, 0, 0)


class TestLossFlip:
    def test_examples(self):
        assert loss_flip(0.3, -0.3) == pytest.approx(0.0, abs=1e-15)
        assert loss_flip(0.0, 0.0) == 0.0
        assert loss_flip(0.2, 0.2) == pytest.approx(0.08)

    def test_symmetry_and_wrap_invariance(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            t1, t2 = rng.uniform(-10, 10, size=2)
            v = loss_flip(t1, t2)
            assert v >= 0
            assert loss_flip(t2, t1) == pytest.approx(v, abs=1e-12)
            assert loss_flip(t1 + math.pi, t2) == pytest.approx(v, abs=1e-9)
            assert loss_flip(t1, t2 + math.pi) == pytest.approx(v, abs=1e-9)


class TestLossRotate:
    def test_examples(self):
        assert loss_rotate(0.1, 0.1 + 0.4 * math.pi, 0.4 * math.pi) == pytest.approx(0.0, abs=1e-15)
        assert loss_rotate(0.23, 0.23, 0.0) == pytest.approx(0.0, abs=1e-15)
        # residual -0.1 pi in the quadratic branch
        expected = 0.5 * (0.1 * math.pi) ** 2
        assert loss_rotate(0.0, 0.3 * math.pi, 0.4 * math.pi) == pytest.approx(expected)

    def test_wrap_across_boundary(self):
        # a rotation near pi/2 must not create a spurious large residual
        assert loss_rotate(0.4, 0.4 + 0.6 * math.pi, 0.6 * math.pi) == pytest.approx(0.0, abs=1e-12)


class TestLossScale:
    def test_consistent_pair_is_zero(self):
        b = RBox(40, 60, 20, 10, 0.3)
        t = TransformSpec("scale", factor=1.25)
        bt = transform_rbox(b, t, IMAGE)
        assert loss_scale(b, bt, 1.25) == pytest.approx(0.0, abs=1e-12)

    def test_identity(self):
        b = RBox(40, 60, 20, 10, 0.3)
        assert loss_scale(b, b, 1.0) == pytest.approx(0.0, abs=1e-12)

    def test_disjoint_example(self):
        # circumscribed boxes [0,1]^2 (after scaling by 1) and [2,3]x[0,1]
        a = RBox(0.5, 0.5, 1, 1, 0)
        b = RBox(2.5, 0.5, 1, 1, 0)
        assert loss_scale(a, b, 1.0) == pytest.approx(4 / 3)


class TestLossPoint:
    def _pred(self, boxes, scores, m_point, matched):
        n = len(boxes)
        return BranchPrediction(np.array(boxes, dtype=float),
                                np.array(scores, dtype=float),
                                np.array(m_point), np.zeros(n, dtype=bool),
                                np.array(matched))

    def test_perfect_centers(self):
        pred = self._pred([[10, 20, 5, 5, 0]], [[0.1, 0.9]], [True], [0])
        result = loss_point(pred, [((10, 20), 1)])
        assert result.l_cen == 0.0
        assert result.count == 1

    def test_offset_center_mean(self):
        pred = self._pred([[13, 24, 5, 5, 0]], [[0.9, 0.1]], [True], [0])
        result = loss_point(pred, [((10, 20), 0)])
        assert result.l_cen == pytest.approx(3.5)

    def test_empty_mask(self):
        pred = self._pred([[0, 0, 1, 1, 0]], [[0.5, 0.5]], [False], [-1])
        result = loss_point(pred, [])
        assert (result.l_cls, result.l_cen, result.count) == (0.0, 0.0, 0)

    def test_confident_correct_scores_cheaper(self):
        good = self._pred([[0, 0, 1, 1, 0]], [[0.01, 0.95]], [True], [0])
        bad = self._pred([[0, 0, 1, 1, 0]], [[0.95, 0.05]], [True], [0])
        gt = [((0, 0), 1)]
        assert loss_point(good, gt).l_cls < loss_point(bad, gt).l_cls


class TestLossBox:
    def _pred(self, boxes, m_box, matched):
        n = len(boxes)
        return BranchPrediction(np.array(boxes, dtype=float),
                                np.full((n, 2), 0.5),
                                np.zeros(n, dtype=bool), np.array(m_box),
                                np.array(matched))

    def test_exact_match_zero(self):
        gt = [(RBox(10, 20, 8, 4, 0.3), 0)]
        pred = self._pred([[10, 20, 8, 4, 0.3]], [True], [0])
        assert loss_box(pred, gt) == pytest.approx(0.0, abs=1e-15)

    def test_angle_offset(self):
        gt = [(RBox(10, 20, 8, 4, 0.1), 0)]
        pred = self._pred([[10, 20, 8, 4, 0.3]], [True], [0])
        assert loss_box(pred, gt) == pytest.approx(0.02)

    def test_empty(self):
        pred = self._pred([[0, 0, 1, 1, 0]], [False], [-1])
        assert loss_box(pred, []) == 0.0


class TestLossSS:
    def _branch_pair(self, boxes_ori, boxes_trs, matched=None):
        n = len(boxes_ori)
        if matched is None:
            matched = list(range(n))
        make = lambda boxes, tag: BranchPrediction(
            np.array(boxes, dtype=float), np.full((n, 2), 0.5),
            np.ones(n, dtype=bool), np.zeros(n, dtype=bool),
            np.array(matched), tag)
        return make(boxes_ori, "original"), make(boxes_trs, "transformed")

    @pytest.mark.parametrize("t", [
        TransformSpec("flip"),
        TransformSpec("rotate", angle=0.4 * math.pi),
        TransformSpec("scale", factor=1.3),
    ])
    def test_zero_for_true_transform(self, t):
        rng = np.random.default_rng(1)
        boxes = [random_box(rng) for _ in range(4)]
        trs = [transform_rbox(b, t, IMAGE) for b in boxes]
        ori_p, trs_p = self._branch_pair([b.as_array() for b in boxes],
                                         [b.as_array() for b in trs])
        assert loss_ss(ori_p, trs_p, t) == pytest.approx(0.0, abs=1e-12)

    def test_no_real_objects(self):
        ori, trs = self._branch_pair([], [])
        assert loss_ss(ori, trs, TransformSpec("flip")) == 0.0

    def test_two_flip_pairs_mean(self):
        # residuals 0 and 0.4 under flip -> smooth-l1 values 0 and 0.08
        ori, trs = self._branch_pair([[0, 0, 5, 5, 0.1], [0, 0, 5, 5, 0.2]],
                                     [[0, 0, 5, 5, -0.1], [0, 0, 5, 5, 0.2]])
        assert loss_ss(ori, trs, TransformSpec("flip")) == pytest.approx(0.04)

    def test_misaligned_pairing_rejected(self):
        ori, _ = self._branch_pair([[0, 0, 5, 5, 0.1]], [[0, 0, 5, 5, 0.1]])
        trs_short = BranchPrediction(np.zeros((1, 5)) + [0, 0, 5, 5, 0.1],
                                     np.full((1, 2), 0.5), np.zeros(1, dtype=bool),
                                     np.zeros(1, dtype=bool), np.array([-1]),
                                     "transformed")
        with pytest.raises(ValueError):
            loss_ss(ori, trs_short, TransformSpec("flip"))


class TestTotalLoss:
    def test_all_zero(self):
        assert total_loss(0, 0, 0, 0, "rotate") == 0.0

    def test_rotate_weighting(self):
        assert total_loss(1, 1, 1, 1, "rotate") == pytest.approx(2.4)
        assert total_loss(1, 1, 1, 1, "flip") == pytest.approx(2.4)

    def test_scale_weighting(self):
        assert total_loss(1, 1, 1, 1, "scale") == pytest.approx(2.12)

    def test_linearity(self):
        rng = np.random.default_rng(2)
        w = LossWeights()
        for kind in ("flip", "rotate", "scale"):
            parts = rng.uniform(0, 5, size=4)
            expected = (w.w_cls * parts[0] + w.w_cen * parts[1]
                        + w.w_box * parts[2] + w.w_ss(kind) * parts[3])
            assert total_loss(*parts, kind) == pytest.approx(expected)

    def test_weights_validated(self):
        with pytest.raises(ValueError):
            LossWeights(w_cls=-1)


class TestBranchPrediction:
    def test_disjoint_masks_enforced(self):
        with pytest.raises(ValueError):
            BranchPrediction(np.zeros((1, 5)) + 1, np.full((1, 2), 0.5),
                             np.array([True]), np.array([True]), np.array([0]))

    def test_score_range_enforced(self):
        with pytest.raises(ValueError):
            BranchPrediction(np.zeros((1, 5)) + 1, np.full((1, 2), 1.5),
                             np.array([True]), np.array([False]), np.array([0]))


class TestFocalLoss:
    def test_perfect_prediction_near_zero(self):
        assert focal_loss(np.array([0.999999, 1e-6]), 0) < 1e-4

    def test_wrong_confident_prediction_expensive(self):
        assert focal_loss(np.array([1e-6, 0.999999]), 0) > 3.0


class TestGradCheck:
    def test_smooth_l1_analytic_values(self):
        assert grad_check("smooth_l1", np.array([0.5])) < 1e-9
        assert grad_check("smooth_l1", np.array([2.0])) < 1e-9

    def test_all_losses_at_random_smooth_points(self):
        rng = np.random.default_rng(3)
        for name in ("smooth_l1", "loss_flip", "loss_rotate", "loss_scale", "loss_box"):
            for _ in range(100):
                params, fixed = sample_smooth_params(name, rng)
                assert grad_check(name, params, 1e-5, **fixed) <= 1e-6

    def test_kink_rejected(self):
        with pytest.raises(KinkError):
            grad_check("smooth_l1", np.array([1.0]))  # |r| == beta

    def test_unknown_loss(self):
        with pytest.raises(KeyError):
            grad_check("loss_unknown", np.array([0.0]))


class TestZeroAtConsistency:
    def test_random_boxes(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            b = random_box(rng)
            bt = transform_rbox(b, TransformSpec("flip"), IMAGE)
            assert loss_flip(b.theta, bt.theta) <= 1e-12
            angle = float(rng.uniform(0.25 * math.pi, 0.75 * math.pi))
            bt = transform_rbox(b, TransformSpec("rotate", angle=angle), IMAGE)
            assert loss_rotate(b.theta, bt.theta, angle) <= 1e-12
            factor = float(rng.uniform(0.5, 1.5))
            bt = transform_rbox(b, TransformSpec("scale", factor=factor), IMAGE)
            assert loss_scale(b, bt, factor) <= 1e-12


class TestNonNegativity:
    def test_everything_non_negative(self):
        rng = np.random.default_rng(5)
        for _ in range(300):
            t1, t2 = rng.uniform(-2, 2, size=2)
            assert loss_flip(t1, t2) >= 0
            assert loss_rotate(t1, t2, rng.uniform(0, 2)) >= 0
            a, b = random_box(rng), random_box(rng)
            assert loss_scale(a, b, float(rng.uniform(0.5, 1.5))) >= 0
            assert rbox_regression_loss(a.as_array(), b.as_array()) >= 0
