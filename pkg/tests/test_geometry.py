"""Geometry unit tests: exact values, axioms, and oracle agreement."""

from __future__ import annotations

import math

import numpy as np
import pytest

from circledet.geometry import (
    BoxAA,
    Circle,
    box_iou,
    ciou,
    circle_area,
    circle_intersection_area,
    circle_to_bbox,
    lens_geometry,
    rotate90,
    shift,
)
from circledet.synth import rasterize_mask

from oracles import equal_radius_lens, mc_intersection_area

# Verified against both the closed-form equal-radius lens formula and the
# Monte Carlo oracle (see test_matches_independent_oracles).
UNIT_LENS_D1 = 1.2283696986087567
UNIT_CIOU_D1 = 0.24300979377486326


def quantize(value, grid=64):
    # Snap to 1/grid px so the 90-degree rotation arithmetic is lossless
    # (same idea as the integer-exact rotation identity).
    return round(value * grid) / grid


def random_circle_pairs(n, seed, dyadic=False):
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(n):
        ra = rng.uniform(1.0, 100.0)
        rb = rng.uniform(1.0, 100.0)
        d = rng.uniform(0.0, 2.5 * (ra + rb))
        theta = rng.uniform(0.0, 2 * math.pi)
        ax, ay = rng.uniform(100.0, 400.0, size=2)
        bx = ax + d * math.cos(theta)
        by = ay + d * math.sin(theta)
        if dyadic:
            ax, ay, bx, by, ra, rb = (quantize(v) for v in (ax, ay, bx, by, ra, rb))
        pairs.append((Circle(ax, ay, ra), Circle(bx, by, rb)))
    return pairs


class TestCircleArea:
    def test_unit_circle(self):
        assert circle_area(Circle(0, 0, 1)) == pytest.approx(math.pi, abs=1e-12)

    def test_degenerate(self):
        assert circle_area(Circle(5, 5, 0)) == 0.0

    def test_scaling(self):
        assert circle_area(Circle(0, 0, 2)) == pytest.approx(4 * math.pi, abs=1e-12)


class TestIntersectionArea:
    def test_identical(self):
        a = Circle(0, 0, 1)
        assert circle_intersection_area(a, a) == pytest.approx(math.pi, abs=1e-12)

    def test_disjoint(self):
        assert circle_intersection_area(Circle(0, 0, 1), Circle(3, 0, 1)) == 0.0

    def test_unit_circles_distance_one(self):
        got = circle_intersection_area(Circle(0, 0, 1), Circle(1, 0, 1))
        assert got == pytest.approx(UNIT_LENS_D1, abs=1e-12)
        assert got == pytest.approx(equal_radius_lens(1.0, 1.0), abs=1e-12)

    def test_containment(self):
        got = circle_intersection_area(Circle(0, 0, 2), Circle(0.5, 0, 1))
        assert got == pytest.approx(math.pi, abs=1e-12)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Circle(math.nan, 0, 1)
        with pytest.raises(ValueError):
            Circle(0, math.inf, 1)

    def test_matches_independent_oracles(self):
        # Closed-form equal-radius lens plus a 1e6-sample Monte Carlo run.
        a, b = Circle(0, 0, 1), Circle(1, 0, 1)
        assert equal_radius_lens(1.0, 1.0) == pytest.approx(UNIT_LENS_D1, abs=1e-12)
        mc = mc_intersection_area(a, b, n_samples=10**6, seed=11)
        assert mc == pytest.approx(UNIT_LENS_D1, abs=2e-4)

    def test_symmetric_bit_identical(self):
        for a, b in random_circle_pairs(200, seed=1):
            assert circle_intersection_area(a, b) == circle_intersection_area(b, a)

    def test_continuity_near_tangency(self):
        r = 10.0
        inner = circle_intersection_area(Circle(0, 0, r), Circle(2 * r - 1e-9, 0, r))
        assert 0.0 <= inner < 1e-3

    def test_oracle_agreement_sampled(self):
        # Reduced version of the acceptance sweep: normalized area error vs
        # a 1e5-sample stratified Monte Carlo run.
        for i, (a, b) in enumerate(random_circle_pairs(300, seed=2)):
            analytic = circle_intersection_area(a, b)
            union = circle_area(a) + circle_area(b) - analytic
            mc = mc_intersection_area(a, b, n_samples=10**5, seed=100 + i)
            assert abs(analytic - mc) / union <= 1e-3


class TestPaperStyleChordFormula:
    def test_agrees_in_opposite_sides_regime(self):
        # Literal arcsin/chord transcription (with the sqrt argument as
        # rb^2 - ra^2 + lx^2, which equals (d - lx)^2); only valid when the
        # chord separates the two centers, i.e. 0 < lx < d. Sampling stays 5%
        # away from the tangency/containment boundaries, where ly loses
        # precision to cancellation in both forms.
        rng = np.random.default_rng(3)
        checked = 0
        while checked < 200:
            ra = rng.uniform(1.0, 50.0)
            rb = rng.uniform(1.0, 50.0)
            lo, hi = abs(ra - rb), ra + rb
            d = rng.uniform(lo + 0.05 * (hi - lo), hi - 0.05 * (hi - lo))
            a, b = Circle(0, 0, ra), Circle(d, 0, rb)
            lens = lens_geometry(a, b)
            if not 0 < lens.lx < d:
                continue
            transcribed = (
                ra * ra * math.asin(lens.ly / ra)
                + rb * rb * math.asin(lens.ly / rb)
                - lens.ly * (lens.lx + math.sqrt(rb * rb - ra * ra + lens.lx * lens.lx))
            )
            got = circle_intersection_area(a, b)
            assert got == pytest.approx(transcribed, rel=1e-9)
            checked += 1

    def test_lens_geometry_regime(self):
        with pytest.raises(ValueError):
            lens_geometry(Circle(0, 0, 1), Circle(3, 0, 1))
        with pytest.raises(ValueError):
            lens_geometry(Circle(0, 0, 2), Circle(0.2, 0, 1))
        lens = lens_geometry(Circle(0, 0, 1), Circle(1, 0, 1))
        assert lens.d == 1.0
        assert lens.lx == pytest.approx(0.5)
        assert lens.ly == pytest.approx(math.sqrt(0.75))


class TestCiou:
    def test_identical(self):
        assert ciou(Circle(3, 4, 5), Circle(3, 4, 5)) == 1.0

    def test_concentric_two_to_one(self):
        assert ciou(Circle(0, 0, 2), Circle(0, 0, 1)) == 0.25

    def test_unit_distance_one(self):
        assert ciou(Circle(0, 0, 1), Circle(1, 0, 1)) == pytest.approx(UNIT_CIOU_D1, abs=1e-12)

    def test_both_zero_radii_rejected(self):
        with pytest.raises(ValueError):
            ciou(Circle(0, 0, 0), Circle(1, 1, 0))

    def test_symmetry_and_bounds(self):
        for a, b in random_circle_pairs(500, seed=4):
            v = ciou(a, b)
            assert v == ciou(b, a)
            assert 0.0 <= v <= 1.0
            identical = a.cx == b.cx and a.cy == b.cy and a.r == b.r
            assert (v == 1.0) == identical

    def test_containment_identity(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            rmax = rng.uniform(2.0, 100.0)
            rmin = rng.uniform(0.5, rmax * 0.9)
            d = rng.uniform(0.0, (rmax - rmin) * 0.999)
            theta = rng.uniform(0, 2 * math.pi)
            a = Circle(0, 0, rmax)
            b = Circle(d * math.cos(theta), d * math.sin(theta), rmin)
            assert ciou(a, b) == (rmin * rmin) / (rmax * rmax)

    def test_monotone_in_center_distance(self):
        for ra, rb in [(1.0, 1.0), (3.0, 7.0), (20.0, 5.0)]:
            values = [ciou(Circle(0, 0, ra), Circle(d, 0, rb))
                      for d in np.linspace(0, 1.2 * (ra + rb), 200)]
            assert all(v1 >= v2 for v1, v2 in zip(values, values[1:]))

    def test_scale_invariance(self):
        for a, b in random_circle_pairs(200, seed=6):
            base = ciou(a, b)
            for s in (0.125, 3.7, 100.0):
                scaled = ciou(Circle(a.cx * s, a.cy * s, a.r * s),
                              Circle(b.cx * s, b.cy * s, b.r * s))
                # absolute floor covers near-tangent slivers, where the value
                # itself is cancellation-limited
                assert scaled == pytest.approx(base, rel=1e-12, abs=1e-14)

    def test_rotation_invariance_exact(self):
        w, h = 1024, 768
        for a, b in random_circle_pairs(200, seed=7, dyadic=True):
            base = ciou(a, b)
            for turns in (1, 2, 3):
                assert ciou(rotate90(a, w, h, turns), rotate90(b, w, h, turns)) == base


class TestBoxIou:
    def test_identical(self):
        assert box_iou(BoxAA(1, 2, 3, 4), BoxAA(1, 2, 3, 4)) == 1.0

    def test_disjoint(self):
        assert box_iou(BoxAA(0, 0, 1, 1), BoxAA(5, 5, 1, 1)) == 0.0

    def test_hand_counted_overlap(self):
        # overlap 1x2 over union 8-2
        assert box_iou(BoxAA(0, 0, 2, 2), BoxAA(1, 0, 2, 2)) == pytest.approx(2 / 6, abs=1e-12)

    def test_rotation_invariance_exact(self):
        rng = np.random.default_rng(8)
        w, h = 640, 480
        for _ in range(200):
            a = BoxAA(*(quantize(v) for v in (rng.uniform(0, 500), rng.uniform(0, 300),
                                              rng.uniform(1, 100), rng.uniform(1, 100))))
            b = BoxAA(*(quantize(v) for v in (rng.uniform(0, 500), rng.uniform(0, 300),
                                              rng.uniform(1, 100), rng.uniform(1, 100))))
            base = box_iou(a, b)
            for turns in (1, 2, 3):
                assert box_iou(rotate90(a, w, h, turns), rotate90(b, w, h, turns)) == base

    def test_invalid_box_rejected(self):
        with pytest.raises(ValueError):
            BoxAA(0, 0, 0, 1)
        with pytest.raises(ValueError):
            BoxAA(0, 0, 1, -2)


class TestCircleToBbox:
    def test_examples(self):
        assert circle_to_bbox(Circle(5, 5, 2)) == BoxAA(3, 3, 4, 4)
        assert circle_to_bbox(Circle(0, 0, 1)) == BoxAA(-1, -1, 2, 2)

    def test_inscribed_round_trip(self):
        c = Circle(12.5, -3.25, 7.75)
        box = circle_to_bbox(c)
        inscribed = Circle(box.x + box.w / 2, box.y + box.h / 2, box.w / 2)
        assert inscribed == c

    def test_degenerate_rejected(self):
        with pytest.raises(ValueError):
            circle_to_bbox(Circle(0, 0, 0))


class TestRotate90:
    def test_circle_one_turn(self):
        assert rotate90(Circle(10, 20, 5), 100, 100, 1) == Circle(20, 90, 5)

    def test_zero_turns_identity(self):
        c = Circle(10.5, 20.25, 5)
        b = BoxAA(3, 4, 5, 6)
        assert rotate90(c, 100, 200, 0) == c
        assert rotate90(b, 100, 200, 0) == b

    def test_four_turns_identity_exact(self):
        shapes = [Circle(10, 20, 5), BoxAA(3, 4, 10, 6), Circle(63, 17, 9)]
        for s in shapes:
            out = s
            w, h = 100, 60
            for _ in range(4):
                out = rotate90(out, w, h, 1)
                w, h = h, w
            assert out == s
            assert rotate90(s, 100, 60, 4) == s

    def test_box_dimensions_swap(self):
        out = rotate90(BoxAA(10, 20, 30, 5), 100, 60, 1)
        assert (out.w, out.h) == (5, 30)

    def test_against_rotated_raster_mask(self):
        # Rotate a rasterized disk with numpy (counter-clockwise) and re-fit
        # its centroid; must land on the analytically rotated center.
        c = Circle(10, 20, 5)
        mask, area = rasterize_mask(c, 100, 100)
        rotated_mask = np.rot90(mask)
        ys, xs = np.nonzero(rotated_mask)
        centroid_x = float(np.mean(xs + 0.5))
        centroid_y = float(np.mean(ys + 0.5))
        expected = rotate90(c, 100, 100, 1)
        assert centroid_x == pytest.approx(expected.cx, abs=0.5)
        assert centroid_y == pytest.approx(expected.cy, abs=0.5)
        assert math.sqrt(area / math.pi) == pytest.approx(expected.r, abs=0.5)


class TestShift:
    def test_zero_distance(self):
        c = Circle(1, 2, 3)
        assert shift(c, 0, 1.234) == c

    def test_axis_shift(self):
        assert shift(Circle(0, 0, 1), 2, 0) == Circle(2, 0, 1)

    def test_round_trip(self):
        b = BoxAA(5, 6, 7, 8)
        back = shift(shift(b, 3.5, 0.7), 3.5, 0.7 + math.pi)
        assert back.x == pytest.approx(b.x, abs=1e-12)
        assert back.y == pytest.approx(b.y, abs=1e-12)
        assert (back.w, back.h) == (b.w, b.h)

    def test_negative_distance_rejected(self):
        with pytest.raises(ValueError):
            shift(Circle(0, 0, 1), -1, 0)
