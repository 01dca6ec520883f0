import itertools
import math

import numpy as np
import pytest

from xkmedians.core import CenterSet, XkmediansError, cost_unconstrained, lp_distance
from xkmedians.harness import (
    COUPLING_CONFIGURATIONS,
    ExperimentConfig,
    NaiveRecomputeClusterer,
    StaticClusterer,
    canonical_shape,
    check_center_separation,
    chi_square_homogeneity,
    empirical_radius_decay,
    gen_gaussian_mixture,
    gen_lower_bound_lp,
    gen_request_stream,
    gen_universal_lb,
    reference_kmedians,
    run_competitive_experiment,
    run_coupling_test,
    run_dynamic_experiment,
    run_fully_dynamic,
    theorem_envelope,
)
from xkmedians.rng import RngHandle


class TestReferenceKmedians:
    def test_exact_points_cost_zero(self):
        X = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        cs = reference_kmedians(X, 3, 2.0, RngHandle(0))
        assert cost_unconstrained(X, cs, 2.0) == 0.0

    def test_k1_line_picks_median(self):
        # Brute force over the five candidate points: 2 minimizes sum |x-c|.
        X = np.array([[0.0], [1.0], [2.0], [3.0], [4.0]])
        best = min(range(5), key=lambda i: sum(abs(x[0] - X[i][0]) for x in X))
        assert X[best][0] == 2.0
        cs = reference_kmedians(X, 1, 1.0, RngHandle(3))
        assert cs.coords[0][0] == 2.0

    def test_two_cluster_quality_vs_pair_enumeration(self):
        gen = np.random.default_rng(7)
        X = np.concatenate([
            gen.normal(-2.0, 0.3, (10, 2)),
            gen.normal(2.0, 0.3, (10, 2)),
        ])
        best = min(
            sum(min(lp_distance(x, X[i], 2.0), lp_distance(x, X[j], 2.0)) for x in X)
            for i, j in itertools.combinations(range(20), 2)
        )
        cs = reference_kmedians(X, 2, 2.0, RngHandle(1))
        assert cost_unconstrained(X, cs, 2.0) <= 1.2 * best

    def test_requires_enough_points(self):
        with pytest.raises(XkmediansError):
            reference_kmedians(np.zeros((2, 1)), 3, 1.0, RngHandle(0))

    def test_cost_never_increases(self):
        # Swap acceptance is strict improvement; final <= seeded cost.
        gen = np.random.default_rng(2)
        X = gen.uniform(-1, 1, (60, 3))
        for p in (1.0, 2.0):
            cs = reference_kmedians(X, 5, p, RngHandle(11), swap_budget=50)
            seeded = reference_kmedians(X, 5, p, RngHandle(11), swap_budget=0)
            assert cost_unconstrained(X, cs, p) <= cost_unconstrained(X, seeded, p) + 1e-9


class TestGaussianMixture:
    def test_zero_spread_zero_cost(self):
        inst = gen_gaussian_mixture(4, 3, 5, 0.0, RngHandle(0))
        assert cost_unconstrained(inst.points, inst.centers, inst.p) == 0.0

    def test_single_cluster_near_mean(self):
        inst = gen_gaussian_mixture(1, 2, 50, 0.05, RngHandle(1))
        mean = inst.centers.coords[0]
        assert np.abs(inst.points - mean).max() < 0.5

    def test_deterministic(self):
        a = gen_gaussian_mixture(3, 2, 4, 0.1, RngHandle(5))
        b = gen_gaussian_mixture(3, 2, 4, 0.1, RngHandle(5))
        assert np.array_equal(a.points, b.points)
        assert np.array_equal(a.centers.coords, b.centers.coords)


class TestLowerBound:
    def test_dimension_formula_k8_p1(self):
        lb = gen_lower_bound_lp(8, 1.0, RngHandle(0))
        assert lb.d_paper == math.ceil(64 * math.log(8)) == 134
        assert lb.d_used == 134

    def test_eps_rounding_k8(self):
        lb = gen_lower_bound_lp(8, 1.0, RngHandle(0))
        assert lb.eps == pytest.approx(1.0 / 3.0)
        grid = np.unique(lb.instance.centers.coords)
        assert set(np.round(grid * 3).astype(int)) <= {0, 1, 2, 3}

    def test_point_count(self):
        lb = gen_lower_bound_lp(8, 1.0, RngHandle(1), n_coincident=3)
        assert lb.instance.points.shape[0] == 8 * (3 + 2)

    def test_certified_opt_bound(self):
        for seed in range(5):
            lb = gen_lower_bound_lp(8, 1.0, RngHandle(seed))
            cu = cost_unconstrained(lb.instance.points, lb.instance.centers, 1.0)
            assert cu <= lb.opt_upper_bound + 1e-9

    def test_separation_k8_p1(self):
        ok = 0
        for seed in range(30):
            lb = gen_lower_bound_lp(8, 1.0, RngHandle(seed))
            rep = check_center_separation(lb)
            ok += rep.passed
            if rep.passed:
                assert rep.ratio >= 1.0 / 12.0
        assert ok >= 29  # failure probability <= 1/k^2 per draw

    def test_centers_distinct_always(self):
        lb = gen_lower_bound_lp(2, 1.0, RngHandle(3), d_override=4)
        c = lb.instance.centers.coords
        assert not np.array_equal(c[0], c[1])

    def test_d_override(self):
        lb = gen_lower_bound_lp(8, 3.0, RngHandle(0), d_override=20)
        assert lb.d_used == 20 and lb.d_paper == math.ceil(64 * 81 * math.log(8))
        assert lb.instance.centers.dim == 20


class TestUniversal:
    def test_d16_center(self):
        uni = gen_universal_lb(16)
        assert uni.centers.coords[1][0] == 9.0
        assert (uni.centers.coords[1][1:] == 1.0).all()

    def test_optimal_costs(self):
        uni = gen_universal_lb(16)
        assert uni.optimal_special_cost(1.0) == pytest.approx(8.0)  # d^(3/4)
        assert uni.optimal_special_cost(2.0) == pytest.approx(4.0)  # sqrt(d)


class TestCompetitive:
    def test_ratios_at_least_one(self):
        cfg = ExperimentConfig(p=2.0, k=4, d=3, n_per_cluster=6, trials=8, seed=1)
        res = run_competitive_experiment(cfg)
        assert all(r["ratio"] >= 1.0 - 1e-9 for r in res["rows"])

    def test_k1_ratio_exactly_one(self):
        cfg = ExperimentConfig(p=1.0, k=1, d=2, n_per_cluster=10, trials=3, seed=2)
        res = run_competitive_experiment(cfg)
        assert all(r["ratio"] == pytest.approx(1.0) for r in res["rows"])

    def test_zero_cost_convention(self):
        cfg = ExperimentConfig(p=2.0, k=3, d=2, n_per_cluster=2, spread=0.0,
                               trials=2, seed=3)
        res = run_competitive_experiment(cfg)
        assert all(r["zero_cost"] and r["ratio"] == 1.0 for r in res["rows"])

    def test_envelope_formula(self):
        assert theorem_envelope(1.0, 16) == pytest.approx(math.log(16))
        assert theorem_envelope(2.0, 16) == pytest.approx(
            2 * math.log(16) ** (1 + 0.5 - 0.25))


class TestDynamicExperiment:
    def test_insert_then_delete_all_empties(self):
        cfg = ExperimentConfig(experiment="dynamic", k=8, d=2, n_requests=60,
                               seed=4, checkpoint_every=20)
        res = run_dynamic_experiment(cfg)
        assert res["summary"]["requests"] == 60
        assert res["summary"]["rebuild_requests"] <= 60
        assert all(r["recourse"] >= 0 for r in res["ledger"])

    def test_checkpoints_present(self):
        cfg = ExperimentConfig(experiment="dynamic", k=6, d=2, n_requests=100,
                               seed=5, checkpoint_every=25)
        res = run_dynamic_experiment(cfg)
        assert len(res["checkpoints"]) >= 3


class TestCouplingHarness:
    def test_canonical_shape_ignores_thresholds(self):
        from xkmedians.core import Cut, Internal, Leaf, ThresholdTree

        t1 = ThresholdTree(Internal(Cut(0, 0.3), Leaf(0), Leaf(1)))
        t2 = ThresholdTree(Internal(Cut(1, 0.9), Leaf(0), Leaf(1)))
        assert canonical_shape(t1) == canonical_shape(t2)

    def test_chi_square_trivial_single_bin(self):
        from collections import Counter

        res = chi_square_homogeneity(Counter({"a": 50}), Counter({"a": 50}))
        assert res["p_value"] == 1.0 and res["dof"] == 0

    def test_chi_square_detects_difference(self):
        from collections import Counter

        res = chi_square_homogeneity(
            Counter({"a": 90, "b": 10}), Counter({"a": 10, "b": 90}))
        assert res["p_value"] < 0.001

    def test_k2_shapes_trivially_match(self):
        cfg = ExperimentConfig(experiment="coupling", p=2.0, d=1, k=2,
                               coupling_streams=5, stream_length=10,
                               seeds_per_builder=50, seed=6)
        saved = dict(COUPLING_CONFIGURATIONS)
        try:
            COUPLING_CONFIGURATIONS.clear()
            COUPLING_CONFIGURATIONS["pair"] = np.array([[0.0], [0.5]])
            res = run_coupling_test(cfg)
        finally:
            COUPLING_CONFIGURATIONS.clear()
            COUPLING_CONFIGURATIONS.update(saved)
        assert res["shape_tests"]["pair"]["p_value"] == 1.0
        assert res["replay_equal"] == res["replay_streams"]

    def test_small_coupling_run(self):
        cfg = ExperimentConfig(experiment="coupling", p=2.0, d=2, k=4,
                               coupling_streams=8, stream_length=20,
                               seeds_per_builder=400, seed=7)
        res = run_coupling_test(cfg)
        assert res["replay_equal"] == res["replay_streams"], res["replay_mismatches"]
        for stats in res["shape_tests"].values():
            assert stats["p_value"] > 0.001


class TestFullyDynamic:
    def test_static_clusterer_recourse_settles(self):
        centers = np.array([[0.5, 0.5], [-0.5, -0.5]])
        cfg = ExperimentConfig(experiment="fully_dynamic", k=2, d=2,
                               n_requests=40, seed=8, checkpoint_every=10,
                               box_halfwidth=2.0)
        res = run_fully_dynamic(cfg, StaticClusterer(centers))
        # After both centers are inserted once, nothing changes again.
        assert res["amortized_tree_recourse"] <= (1 + 4) / 40 + 1e-9
        assert res["final_centers"] == 2

    def test_naive_clusterer_bounded_sizes_and_ratios(self):
        cfg = ExperimentConfig(experiment="fully_dynamic", k=4, d=2,
                               n_requests=80, seed=9, checkpoint_every=20,
                               box_halfwidth=2.0)
        clusterer = NaiveRecomputeClusterer(4, 2.0, RngHandle(9).child(1))
        res = run_fully_dynamic(cfg, clusterer)
        assert res["final_centers"] <= 4
        for cp in res["checkpoints"]:
            assert cp["ratio"] >= 1.0 - 1e-9


class TestRadiusDecay:
    def test_two_centers_single_step(self):
        cs = CenterSet([[0.0], [1.0]])
        res = empirical_radius_decay(cs, 1.0, trials=5, rng=RngHandle(0))
        assert all(len(tr) == 1 for tr in res["traces"])

    def test_radius_nonincreasing_in_traces(self):
        cs = CenterSet(np.random.default_rng(1).uniform(-1, 1, (10, 3)))
        res = empirical_radius_decay(cs, 2.0, trials=10, rng=RngHandle(2))
        for tr in res["traces"]:
            radii = [r for _, r in tr]
            assert all(a >= b for a, b in zip(radii, radii[1:]))

    def test_analysis_bound_formula(self):
        cs = CenterSet(np.random.default_rng(3).uniform(-1, 1, (16, 4)))
        res = empirical_radius_decay(cs, 1.0, trials=2, rng=RngHandle(4))
        assert res["analysis_bound"] == math.ceil(2**4 * 4 * math.log(16)) == 178


class TestRequestStreamGen:
    def test_ids_match_insert_order(self):
        reqs = gen_request_stream(4, 2, 50, RngHandle(1))
        live = set()
        next_id = 0
        for req in reqs:
            if req.op == "insert":
                live.add(next_id)
                next_id += 1
            else:
                assert req.center_id in live
                live.remove(req.center_id)

    def test_config_validation(self):
        assert ExperimentConfig().validate() == []
        bad = ExperimentConfig(experiment="nope", p=0.5, k=0)
        problems = bad.validate()
        assert len(problems) == 3
        with pytest.raises(XkmediansError):
            ExperimentConfig.from_dict({"bogus_field": 1})
