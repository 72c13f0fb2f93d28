import numpy as np
import pytest

import boxquery.autodiff as ad
from boxquery.autodiff import finite_diff_check, tensor
from boxquery.boxes import (
    Box,
    box_distance_t,
    contains,
    contains_box,
    distance,
    distance_outside,
    intersects,
    materialize,
    random_box,
    split_raw_box,
)


def box(center, offset):
    return Box(np.asarray(center, float), np.asarray(offset, float))


class TestMaterialize:
    def test_clamps_negative_offsets(self):
        b = materialize([0.0, 0.0], [3.2, -0.1])
        np.testing.assert_array_equal(b.offset, [3.2, 0.0])

    def test_nonnegative_unchanged(self):
        b = materialize([1.0, 2.0], [0.5, 0.0])
        np.testing.assert_array_equal(b.offset, [0.5, 0.0])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            materialize([0.0, 0.0], [1.0])


class TestPredicates:
    def test_contains(self):
        b = box([0, 0], [1, 1])
        assert contains(b, [0.5, -0.5])
        assert contains(b, [1.0, 1.0])  # closed boundary
        assert not contains(b, [1.5, 0.0])

    def test_intersects_identical(self):
        b = box([0.3, -2.0], [1.0, 0.1])
        assert intersects(b, b)

    def test_intersects_gap(self):
        assert not intersects(box([0, 0], [1, 1]), box([3, 0], [1, 1]))

    def test_intersects_touching(self):
        assert intersects(box([0.0], [1.0]), box([2.0], [1.0]))

    def test_containment_implies_intersection(self, rng):
        for _ in range(200):
            outer = random_box(rng, 3)
            # shrink into the outer box
            inner = Box(outer.center + 0.1 * outer.offset, 0.5 * outer.offset)
            assert contains_box(outer, inner) or not np.all(outer.offset > 0)
            if contains_box(outer, inner):
                assert intersects(outer, inner)


class TestDistance:
    def test_identical_boxes_zero(self):
        b = box([1.0, -2.0], [0.5, 1.5])
        assert distance(b, b, alpha=0.02) == 0.0

    def test_hand_value_disjoint(self):
        a = box([0, 0], [1, 1])
        b2 = box([3, 0], [1, 1])
        # outside gap 1 in dim 0; inside min(3,2)+min(0,2)=2
        assert distance(a, b2, alpha=0.02) == pytest.approx(1.04)

    def test_hand_value_overlapping(self):
        a = box([0.0], [2.0])
        b2 = box([1.0], [2.0])
        assert distance(a, b2, alpha=0.02) == pytest.approx(0.02)

    def test_symmetry_and_sign(self, rng):
        for _ in range(300):
            a = random_box(rng, 4)
            b2 = random_box(rng, 4)
            d1 = distance(a, b2)
            assert d1 >= 0.0
            assert d1 == pytest.approx(distance(b2, a), rel=1e-12)

    def test_alpha_monotone(self, rng):
        for _ in range(100):
            a = random_box(rng, 3)
            b2 = random_box(rng, 3)
            assert distance(a, b2, alpha=0.01) <= distance(a, b2, alpha=0.02) + 1e-15

    def test_intersection_iff_zero_outside(self, rng):
        hits = 0
        for _ in range(2000):
            a = random_box(rng, 3)
            b2 = random_box(rng, 3)
            hit = intersects(a, b2)
            hits += hit
            assert hit == (distance_outside(a, b2) == 0.0)
        assert 0 < hits < 2000  # both branches exercised


class TestDifferentiablePath:
    def test_split_matches_materialize(self, rng):
        raw = rng.normal(size=(1, 8))
        center_t, offset_t = split_raw_box(tensor(raw))
        b = materialize(raw[0, :4], raw[0, 4:])
        np.testing.assert_array_equal(center_t.data[0], b.center)
        np.testing.assert_array_equal(offset_t.data[0], b.offset)

    def test_odd_width_rejected(self):
        with pytest.raises(ValueError):
            split_raw_box(tensor(np.zeros((1, 5))))

    def test_matches_plain_distance(self, rng):
        for _ in range(50):
            qa = rng.normal(size=(1, 6))
            eb = rng.normal(size=(5, 6))
            qc, qo = split_raw_box(tensor(qa))
            ec, eo = split_raw_box(tensor(eb))
            got = box_distance_t(qc, qo, ec, eo, alpha=0.02).data[:, 0]
            want = [
                distance(
                    materialize(qa[0, :3], qa[0, 3:]),
                    materialize(eb[i, :3], eb[i, 3:]),
                    alpha=0.02,
                )
                for i in range(5)
            ]
            np.testing.assert_allclose(got, want, rtol=1e-12)

    def test_gradient_away_from_kinks(self):
        rng = np.random.default_rng(9)
        checked = 0
        while checked < 20:
            q = tensor(rng.normal(0, 2, size=(1, 6)), requires_grad=True)
            e = tensor(rng.normal(0, 2, size=(3, 6)), requires_grad=True)

            def f():
                qc, qo = split_raw_box(q)
                ec, eo = split_raw_box(e)
                return ad.sum_all(box_distance_t(qc, qo, ec, eo, alpha=0.02))

            # reject configurations near clamp or min/max kinks
            delta = np.abs(e.data[:, :3] - q.data[:, :3])
            total = np.maximum(e.data[:, 3:], 0) + np.maximum(q.data[:, 3:], 0)
            if (
                np.any(np.abs(delta - total) < 1e-3)
                or np.any(np.abs(q.data[:, 3:]) < 1e-3)
                or np.any(np.abs(e.data[:, 3:]) < 1e-3)
                or np.any(delta < 1e-3)
            ):
                continue
            assert finite_diff_check(f, [q, e]) < 1e-4
            checked += 1
