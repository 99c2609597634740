import math

import numpy as np
import pytest

from p2rkit.geometry import (
    HBox,
    RBox,
    TransformSpec,
    hbox_giou,
    min_area_rbox,
    normalize_angle,
    polygon_area,
    raster_iou_oracle,
    rbox_to_hbox,
    rotated_iou,
    rotated_nms,
    transform_rbox,
)

# closed form for the unit square against its own 45-degree rotation:
# the intersection is a regular octagon of area 2 (sqrt(2) - 1)
IOU_SQUARE_45 = math.sqrt(2) / 2


def random_box(rng, size_lo=4.0, size_hi=200.0):
    return RBox(
        float(rng.uniform(0, 512)),
        float(rng.uniform(0, 512)),
        float(rng.uniform(size_lo, size_hi)),
        float(rng.uniform(size_lo, size_hi)),
        float(rng.uniform(-math.pi / 2, math.pi / 2)),
    )


class TestNormalizeAngle:
    def test_examples(self):
        assert normalize_angle(0.0) == 0.0
        assert abs(normalize_angle(math.pi)) < 1e-15
        assert normalize_angle(0.6 * math.pi) == pytest.approx(-0.4 * math.pi, abs=1e-12)

    def test_idempotent_and_periodic(self):
        rng = np.random.default_rng(0)
        for x in rng.uniform(-50, 50, size=10_000):
            n = normalize_angle(x)
            assert -math.pi / 2 <= n < math.pi / 2
            assert normalize_angle(n) == n
            assert normalize_angle(x + math.pi) == pytest.approx(n, abs=1e-9)
            # congruent mod pi
            assert math.sin(x - n) == pytest.approx(0.0, abs=1e-9)

    def test_rejects_non_finite(self):
        for bad in (math.nan, math.inf, -math.inf):
            with pytest.raises(ValueError):
                normalize_angle(bad)


class TestRBox:
    def test_invariants(self):
        with pytest.raises(ValueError):
            RBox(0, 0, -1, 2, 0)
        with pytest.raises(ValueError):
            RBox(0, 0, 1, 0, 0)
        assert RBox(0, 0, 1, 1, 2.0).theta == pytest.approx(2.0 - math.pi)

    def test_corners_positive_shoelace(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            b = random_box(rng)
            assert polygon_area(b.corners()) == pytest.approx(b.area, rel=1e-12)


class TestRBoxToHBox:
    def test_axis_aligned(self):
        assert rbox_to_hbox(RBox(0, 0, 4, 2, 0)) == HBox(-2, -1, 2, 1)

    def test_quarter_turn(self):
        h = rbox_to_hbox(RBox(0, 0, 4, 2, math.pi / 2))
        assert (h.x_min, h.y_min, h.x_max, h.y_max) == pytest.approx((-1, -2, 1, 2))

    def test_square_45(self):
        h = rbox_to_hbox(RBox(0, 0, math.sqrt(2), math.sqrt(2), math.pi / 4))
        assert (h.x_min, h.y_min, h.x_max, h.y_max) == pytest.approx((-1, -1, 1, 1))

    def test_area_never_smaller(self):
        rng = np.random.default_rng(2)
        for _ in range(500):
            b = random_box(rng)
            hbox = rbox_to_hbox(b)
            assert hbox.area >= b.area - 1e-9
            at_axis = min(abs(b.theta), abs(abs(b.theta) - math.pi / 2)) < 1e-9
            if hbox.area <= b.area + 1e-9:
                assert at_axis or abs(b.w - b.h) < 1e-9


class TestRotatedIoU:
    def test_identical(self):
        b = RBox(10, 20, 5, 3, 0.7)
        assert rotated_iou(b, b) == pytest.approx(1.0, abs=1e-12)

    def test_disjoint(self):
        assert rotated_iou(RBox(0, 0, 2, 2, 0.3), RBox(100, 0, 2, 2, -0.2)) == 0.0

    def test_square_against_rotated_self(self):
        a = RBox(0, 0, 1, 1, 0)
        b = RBox(0, 0, 1, 1, math.pi / 4)
        assert rotated_iou(a, b) == pytest.approx(IOU_SQUARE_45, abs=1e-12)

    def test_symmetry_and_rigid_motion_invariance(self):
        rng = np.random.default_rng(3)
        for _ in range(1000):
            a, b = random_box(rng), random_box(rng)
            iou = rotated_iou(a, b)
            assert 0.0 <= iou <= 1.0
            assert rotated_iou(b, a) == pytest.approx(iou, abs=1e-12)
            # joint rigid motion
            dx, dy = rng.uniform(-100, 100, size=2)
            rot = float(rng.uniform(-math.pi, math.pi))
            c, s = math.cos(rot), math.sin(rot)

            def moved(box):
                x = box.x * c - box.y * s + dx
                y = box.x * s + box.y * c + dy
                return RBox(x, y, box.w, box.h, normalize_angle(box.theta + rot))

            assert rotated_iou(moved(a), moved(b)) == pytest.approx(iou, abs=1e-9)

    def test_degenerate_is_zero(self):
        tiny = RBox(0, 0, 1e-8, 1e-8, 0)
        assert rotated_iou(tiny, tiny) == 0.0


class TestRasterOracle:
    def test_identical(self):
        b = RBox(5, 5, 3, 2, 0.4)
        assert raster_iou_oracle(b, b, 1000) == pytest.approx(1.0, abs=1e-3)

    def test_disjoint(self):
        assert raster_iou_oracle(RBox(0, 0, 2, 2, 0), RBox(100, 0, 2, 2, 0)) == 0.0

    def test_square_against_rotated_self(self):
        a = RBox(0, 0, 1, 1, 0)
        b = RBox(0, 0, 1, 1, math.pi / 4)
        assert raster_iou_oracle(a, b, 2000) == pytest.approx(IOU_SQUARE_45, abs=1e-3)

    def test_rejects_low_resolution(self):
        b = RBox(0, 0, 1, 1, 0)
        with pytest.raises(ValueError):
            raster_iou_oracle(b, b, 100)

    def test_matches_naive_cell_count(self):
        # the scanline counter must agree exactly with literal per-cell
        # membership tests
        rng = np.random.default_rng(4)
        for _ in range(25):
            a, b = random_box(rng), random_box(rng)
            res = 256
            pts = np.vstack([a.corners(), b.corners()])
            x0, y0 = pts.min(axis=0)
            x1, y1 = pts.max(axis=0)
            xs = x0 + (np.arange(res) + 0.5) * (x1 - x0) / res
            ys = y0 + (np.arange(res) + 0.5) * (y1 - y0) / res
            X, Y = xs[None, :], ys[:, None]

            def inside(box):
                c, s = math.cos(box.theta), math.sin(box.theta)
                u = (X - box.x) * c + (Y - box.y) * s
                v = -(X - box.x) * s + (Y - box.y) * c
                return (np.abs(u) <= box.w / 2) & (np.abs(v) <= box.h / 2)

            in_a, in_b = inside(a), inside(b)
            inter = np.count_nonzero(in_a & in_b)
            union = np.count_nonzero(in_a | in_b)
            expected = inter / union if union else 0.0
            assert raster_iou_oracle(a, b, res) == pytest.approx(expected, abs=1e-12)

    def test_agrees_with_clipping(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            a, b = random_box(rng), random_box(rng)
            assert abs(rotated_iou(a, b) - raster_iou_oracle(a, b, 1000)) <= 2e-3


class TestHBoxGIoU:
    def test_identical(self):
        h = HBox(0, 0, 1, 1)
        assert hbox_giou(h, h) == pytest.approx(1.0)

    def test_touching(self):
        assert hbox_giou(HBox(0, 0, 1, 1), HBox(1, 0, 2, 1)) == pytest.approx(0.0)

    def test_disjoint(self):
        assert hbox_giou(HBox(0, 0, 1, 1), HBox(2, 0, 3, 1)) == pytest.approx(-1 / 3)

    def test_degenerate_pair_errors(self):
        with pytest.raises(ValueError):
            hbox_giou(HBox(0, 0, 0, 0), HBox(1, 1, 1, 1))

    def test_range(self):
        rng = np.random.default_rng(6)
        for _ in range(500):
            x0, y0, x1, y1 = rng.uniform(0, 100, 4)
            a = HBox(min(x0, x1), min(y0, y1), max(x0, x1) + 1, max(y0, y1) + 1)
            x0, y0, x1, y1 = rng.uniform(0, 100, 4)
            b = HBox(min(x0, x1), min(y0, y1), max(x0, x1) + 1, max(y0, y1) + 1)
            assert -1.0 < hbox_giou(a, b) <= 1.0


class TestRotatedNMS:
    def test_identical_pair(self):
        boxes = [(RBox(0, 0, 2, 2, 0), 0.9), (RBox(0, 0, 2, 2, 0), 0.8)]
        assert rotated_nms(boxes, 0.05) == [0]

    def test_disjoint_kept(self):
        boxes = [(RBox(0, 0, 2, 2, 0), 0.5), (RBox(50, 0, 2, 2, 0), 0.9)]
        assert rotated_nms(boxes, 0.05) == [1, 0]

    def test_chain_suppression(self):
        # A overlaps B, B overlaps C, A and C disjoint; scores A > B > C
        a = RBox(0, 0, 10, 10, 0)
        b = RBox(2.4, 0, 10, 10, 0)  # IoU(A,B) = 7.6/12.4 ~ 0.61
        c = RBox(4.8, 0, 10, 10, 0)
        assert rotated_iou(a, b) > 0.5 and rotated_iou(b, c) > 0.5
        assert rotated_iou(a, c) < 0.5
        kept = rotated_nms([(a, 0.9), (b, 0.8), (c, 0.7)], 0.5)
        assert kept == [0, 2]

    def test_postcondition(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            boxes = [(random_box(rng, 10, 60), float(rng.uniform())) for _ in range(12)]
            kept = rotated_nms(boxes, 0.3)
            scores = [boxes[i][1] for i in kept]
            assert scores == sorted(scores, reverse=True)
            for i in kept:
                for j in kept:
                    if i < j:
                        assert rotated_iou(boxes[i][0], boxes[j][0]) <= 0.3


class TestTransformRBox:
    def test_vertical_flip(self):
        b = RBox(10, 30, 4, 6, 0.5)
        f = transform_rbox(b, TransformSpec("flip"), (100, 200))
        assert (f.x, f.y, f.w, f.h) == (10, 70, 4, 6)
        assert f.theta == pytest.approx(normalize_angle(-0.5))

    def test_quarter_rotation(self):
        b = RBox(10, 20, 4, 6, 0.3)
        r = transform_rbox(b, TransformSpec("rotate", angle=math.pi / 2), (100, 100))
        assert r.theta == pytest.approx(normalize_angle(0.3 + math.pi / 2))
        # center rotates about (50, 50)
        assert (r.x, r.y) == pytest.approx((50 + (20 - 50) * -1, 50 + (10 - 50)), abs=1e-9)

    def test_scale(self):
        b = RBox(10, 20, 4, 6, 0.3)
        s = transform_rbox(b, TransformSpec("scale", factor=2.0), (100, 100))
        assert (s.x, s.y, s.w, s.h, s.theta) == (20, 40, 8, 12, pytest.approx(0.3))

    def test_flip_involution(self):
        rng = np.random.default_rng(8)
        flip = TransformSpec("flip")
        for _ in range(200):
            b = random_box(rng)
            bb = transform_rbox(transform_rbox(b, flip, (512, 512)), flip, (512, 512))
            assert (bb.x, bb.y, bb.w, bb.h) == (b.x, b.y, b.w, b.h)
            assert bb.theta == pytest.approx(b.theta, abs=1e-12)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            TransformSpec("rotate")
        with pytest.raises(ValueError):
            TransformSpec("scale")
        with pytest.raises(ValueError):
            TransformSpec("flip", angle=1.0)
        with pytest.raises(ValueError):
            TransformSpec("shear")


class TestMinAreaRBox:
    def test_axis_aligned(self):
        b = min_area_rbox(np.array([[0, 0], [10, 0], [10, 5], [0, 5]]))
        assert (b.x, b.y) == pytest.approx((5, 2.5))
        assert sorted((b.w, b.h)) == pytest.approx([5, 10])
        assert b.area == pytest.approx(50)

    def test_rotated_square(self):
        pts = RBox(3, 4, 2, 2, math.pi / 4).corners()
        b = min_area_rbox(pts)
        assert (b.x, b.y) == pytest.approx((3, 4))
        assert b.w == pytest.approx(2) and b.h == pytest.approx(2)
        assert abs(b.theta) == pytest.approx(math.pi / 4)

    def test_degenerate_rejected(self):
        with pytest.raises(ValueError):
            min_area_rbox(np.array([[0, 0], [1, 1], [2, 2], [3, 3]]))
