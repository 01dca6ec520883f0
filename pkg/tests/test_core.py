import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xkmedians.core import (
    CenterSet,
    Cut,
    DimensionMismatch,
    DuplicateCenter,
    EmptyCenterSet,
    Instance,
    Internal,
    Leaf,
    ThresholdTree,
    UnknownCenter,
    assign,
    cost_tree,
    cost_unconstrained,
    instance_from_dict,
    instance_to_dict,
    lp_distance,
    tree_from_dict,
    tree_to_dict,
    validate_tree,
)
from xkmedians.rng import RngHandle


def two_leaf_tree(coord=0, threshold=0.5, left_id=0, right_id=1):
    return ThresholdTree(Internal(Cut(coord, threshold), Leaf(left_id), Leaf(right_id)))


class TestLpDistance:
    def test_identity(self):
        assert lp_distance((0, 0), (0, 0), 2) == 0.0

    def test_345(self):
        assert lp_distance((0, 0), (3, 4), 2) == pytest.approx(5.0)

    def test_cube_root(self):
        # Independent check: x**3 by repeated multiplication equals 3.
        got = lp_distance((0, 0, 0), (1, 1, 1), 3)
        assert got * got * got == pytest.approx(3.0, rel=1e-12)
        assert got == pytest.approx(1.44225, abs=1e-5)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            lp_distance((0, 0), (1, 2, 3), 2)

    @settings(max_examples=200, deadline=None)
    @given(
        st.integers(1, 4),
        st.sampled_from([1.0, 1.5, 2.0, 3.0, 10.0]),
        st.integers(0, 2**32 - 1),
    )
    def test_triangle_inequality(self, d, p, seed):
        gen = np.random.default_rng(seed)
        a, b, c = gen.uniform(-10, 10, (3, d))
        lhs = lp_distance(a, c, p)
        rhs = lp_distance(a, b, p) + lp_distance(b, c, p)
        assert lhs <= rhs * (1 + 1e-9) + 1e-12

    def test_symmetry(self):
        gen = np.random.default_rng(3)
        a, b = gen.normal(size=(2, 6))
        for p in (1, 1.7, 2, 4):
            assert lp_distance(a, b, p) == pytest.approx(lp_distance(b, a, p))


class TestAssign:
    def test_single_leaf(self):
        tree = ThresholdTree(Leaf(0))
        assert assign(tree, (9.9, -3.0)) == 0

    def test_left_of_threshold(self):
        assert assign(two_leaf_tree(), (0.2, 9.9)) == 0

    def test_boundary_goes_right(self):
        assert assign(two_leaf_tree(), (0.5, 0.0)) == 1

    def test_centers_route_to_own_leaf(self):
        from xkmedians.static_builder import build_tree_static

        gen = np.random.default_rng(11)
        for trial in range(20):
            cs = CenterSet(gen.uniform(-1, 1, (8, 3)))
            tree = build_tree_static(cs, 2.0, RngHandle(trial))
            for cid, point in cs.items():
                assert assign(tree, point) == cid


class TestCosts:
    def test_center_on_own_leaf_costs_zero(self):
        cs = CenterSet([[1.0, 2.0]])
        tree = ThresholdTree(Leaf(0))
        assert cost_tree([[1.0, 2.0]], tree, cs, 2.0) == 0.0

    def test_single_point_345(self):
        cs = CenterSet([[3.0, 4.0]])
        tree = ThresholdTree(Leaf(0))
        assert cost_tree([[0.0, 0.0]], tree, cs, 2.0) == pytest.approx(5.0)

    def test_single_center_tree_matches_loop(self):
        gen = np.random.default_rng(5)
        X = gen.normal(size=(40, 3))
        c = gen.normal(size=3)
        cs = CenterSet(c[None, :])
        tree = ThresholdTree(Leaf(0))
        for p in (1.0, 2.0, 2.5):
            expected = sum(lp_distance(x, c, p) for x in X)
            assert cost_tree(X, tree, cs, p) == pytest.approx(expected)

    def test_unknown_center_in_tree(self):
        cs = CenterSet([[0.0], [1.0]])
        tree = ThresholdTree(Leaf(7))
        with pytest.raises(UnknownCenter):
            cost_tree([[0.0]], tree, cs, 1.0)

    def test_unconstrained_zero_on_centers(self):
        coords = np.random.default_rng(0).normal(size=(5, 4))
        cs = CenterSet(coords)
        assert cost_unconstrained(coords, cs, 2.0) == 0.0

    def test_unconstrained_nearest(self):
        cs = CenterSet([[1.0], [-3.0]])
        assert cost_unconstrained([[0.0]], cs, 1.0) == pytest.approx(1.0)

    def test_unconstrained_matches_bruteforce(self):
        gen = np.random.default_rng(9)
        X = gen.normal(size=(20, 4))
        C = gen.normal(size=(3, 4))
        cs = CenterSet(C)
        for p in (1.0, 1.5, 2.0, 3.0):
            brute = sum(min(lp_distance(x, c, p) for c in C) for x in X)
            assert cost_unconstrained(X, cs, p) == pytest.approx(brute)

    def test_tree_cost_dominates_unconstrained(self):
        from xkmedians.static_builder import build_tree_static

        gen = np.random.default_rng(2)
        for trial in range(10):
            C = gen.uniform(-1, 1, (6, 2))
            X = gen.uniform(-1, 1, (30, 2))
            cs = CenterSet(C)
            tree = build_tree_static(cs, 2.0, RngHandle(trial))
            assert cost_tree(X, tree, cs, 2.0) >= cost_unconstrained(X, cs, 2.0) - 1e-9


class TestCenterSet:
    def test_duplicate_coordinates_rejected(self):
        with pytest.raises(DuplicateCenter):
            CenterSet([[1.0, 2.0], [1.0, 2.0]])

    def test_empty_rejected(self):
        with pytest.raises(EmptyCenterSet):
            CenterSet(np.zeros((0, 2)))

    def test_subset_keeps_ids(self):
        cs = CenterSet([[0.0], [1.0], [2.0]])
        sub = cs.subset([2, 0])
        assert list(sub.ids) == [2, 0]
        assert sub.point(2)[0] == 2.0


class TestValidate:
    def test_static_build_valid(self):
        from xkmedians.static_builder import build_tree_static

        cs = CenterSet(np.random.default_rng(1).uniform(-1, 1, (9, 3)))
        tree = build_tree_static(cs, 1.5, RngHandle(0))
        report = validate_tree(tree, cs)
        assert report.ok, report.violations

    def test_side_violation_detected(self):
        cs = CenterSet([[0.0], [1.0]])
        bad = ThresholdTree(Internal(Cut(0, 0.5), Leaf(1), Leaf(0)))  # swapped
        report = validate_tree(bad, cs)
        assert any(v.kind == "side violation" for v in report.violations)

    def test_duplicate_leaf_detected(self):
        cs = CenterSet([[0.0], [1.0]])
        bad = ThresholdTree(Internal(Cut(0, 0.5), Leaf(0), Leaf(0)))
        report = validate_tree(bad, cs)
        assert any(v.kind == "duplicate leaf" for v in report.violations)
        assert any(v.kind == "leaf cover" for v in report.violations)


class TestJson:
    def test_tree_roundtrip(self):
        tree = ThresholdTree(
            Internal(Cut(1, 0.25, -1, 3.5), Leaf(4),
                     Internal(Cut(0, -1.0), Leaf(2), Leaf(7)))
        )
        assert tree_from_dict(tree_to_dict(tree)) == tree

    def test_timestamp_omitted_when_absent(self):
        doc = tree_to_dict(two_leaf_tree())
        assert "timestamp" not in doc["cut"]

    def test_instance_roundtrip(self):
        inst = Instance(np.array([[0.0, 1.0]]), CenterSet([[1.0, 1.0]]), 2.0)
        back = instance_from_dict(instance_to_dict(inst))
        assert back.p == 2.0
        assert np.array_equal(back.points, inst.points)
        assert np.array_equal(back.centers.coords, inst.centers.coords)
