import numpy as np
import pytest

from reserveopt import (
    Box,
    Dataset,
    LinearModel,
    average_reward,
    breakpoint_oracle,
    build_lp,
    build_mip,
    generate_lp_gap_family,
    generate_unbounded_family,
    root_node_solve,
    solve_lp,
    solve_mip,
)

from conftest import random_dataset, random_dataset_in_range


def grid_brute_force(data, box, resolution):
    """Dense grid search over a 2-d box, including the per-axis breakpoints."""
    axes = []
    for j in range(2):
        axis = np.linspace(box.lower[j], box.upper[j], resolution)
        w = data.features_matrix[:, j]
        nz = w != 0
        others = data.features_matrix[:, 1 - j]
        # no cross terms resolved here; the grid just gets denser near bids
        axes.append(axis)
    best = -np.inf
    for b0 in axes[0]:
        v0 = data.features_matrix[:, 0] * b0
        for b1 in axes[1]:
            v = v0 + data.features_matrix[:, 1] * b1
            r = np.where(v <= data.b2s, data.b2s, np.where(v <= data.b1s, v, 0.0))
            best = max(best, float(r.mean()))
    return best


class TestSolveMip:
    def test_single_sample_example(self):
        data = Dataset.from_arrays([[1.0]], [1.0], [0.2])
        box = Box(np.array([-1.0]), np.array([2.0]))
        res = solve_mip(build_mip(data, box))
        assert res.status == "optimal"
        assert res.incumbent_reward == pytest.approx(1.0, abs=1e-9)
        assert res.nodes_explored == 1

    def test_gap_family_small(self):
        data, box = generate_lp_gap_family(2)
        res = solve_mip(build_mip(data, box), time_limit=30)
        assert res.status == "optimal"
        assert res.incumbent_reward == pytest.approx(0.25, abs=1e-9)

    def test_matches_breakpoint_oracle(self, rng):
        for _ in range(50):
            n = int(rng.integers(1, 11))
            data = random_dataset(rng, 1, n)
            box = Box.symmetric(1, float(rng.uniform(0.5, 2.5)))
            _, oracle_reward = breakpoint_oracle(data, box)
            res = solve_mip(build_mip(data, box), time_limit=60)
            assert res.status == "optimal"
            assert res.incumbent_reward == pytest.approx(oracle_reward, abs=1e-6)

    def test_two_dim_beats_grid(self, rng):
        for _ in range(5):
            n = int(rng.integers(2, 7))
            data = random_dataset(rng, 2, n)
            box = Box.symmetric(2, 1.0)
            res = solve_mip(build_mip(data, box), time_limit=60)
            assert res.status == "optimal"
            grid = grid_brute_force(data, box, 150)
            assert res.incumbent_reward >= grid - 1e-4

    def test_three_dim_closes_gap_and_beats_grid(self, rng):
        for _ in range(2):
            data = random_dataset(rng, 3, 6)
            box = Box.symmetric(3, 1.0)
            res = solve_mip(build_mip(data, box), time_limit=120, gap_tol=1e-6)
            assert res.status == "optimal"
            assert res.dual_bound - res.incumbent_reward <= 1e-6
            axis = np.linspace(-1.0, 1.0, 60)
            w = data.features_matrix
            best = -np.inf
            for a in axis:
                va = a * w[:, 0]
                for b in axis:
                    v = va + b * w[:, 1] + np.multiply.outer(axis, w[:, 2])
                    r = np.where(v <= data.b2s, data.b2s, np.where(v <= data.b1s, v, 0.0))
                    best = max(best, float(r.mean(axis=1).max()))
            assert res.incumbent_reward >= best - 1e-4

    def test_single_sample_solved_at_root(self, rng):
        # ideal per-impression relaxation: the root is already integral
        for _ in range(20):
            box = Box.symmetric(2, float(rng.uniform(0.5, 2.0)))
            data = random_dataset_in_range(rng, 2, 1, box)
            res = solve_mip(build_mip(data, box))
            assert res.status == "optimal"
            assert res.nodes_explored == 1

    def test_weak_duality_chain(self, rng):
        for _ in range(5):
            data = random_dataset(rng, 2, 8)
            box = Box.symmetric(2, 1.0, offset=True)
            model = build_mip(data, box)
            root_obj = solve_lp(build_lp(data, box)).objective
            res = solve_mip(model, time_limit=20, max_nodes=50)
            assert res.incumbent_reward <= res.dual_bound + 1e-6
            assert res.dual_bound <= root_obj + 1e-9

    def test_determinism(self, rng):
        data = random_dataset(rng, 2, 6)
        box = Box.symmetric(2, 1.0)
        a = solve_mip(build_mip(data, box), max_nodes=500)
        b = solve_mip(build_mip(data, box), max_nodes=500)
        assert a.incumbent_reward == b.incumbent_reward
        assert a.nodes_explored == b.nodes_explored
        assert a.dual_bound == b.dual_bound
        assert np.array_equal(a.incumbent.beta, b.incumbent.beta)

    def test_time_limit_validation(self, rng):
        data = random_dataset(rng, 1, 2)
        model = build_mip(data, Box.symmetric(1, 1.0))
        with pytest.raises(ValueError):
            solve_mip(model, time_limit=0.0)

    def test_requires_problem_context(self):
        from reserveopt import OptimizationModel

        with pytest.raises(ValueError):
            solve_mip(OptimizationModel())

    def test_node_budget_reports_open_bound(self):
        data, box = generate_lp_gap_family(8)
        res = solve_mip(build_mip(data, box), max_nodes=10)
        assert res.status == "feasible_time_limit"
        assert res.incumbent_reward == pytest.approx(1.0 / 16.0, abs=1e-6)
        assert res.dual_bound >= 0.5 - 1e-9

    def test_constant_price_seed_with_offset(self, rng):
        from reserveopt import optimal_constant_price

        data = random_dataset(rng, 3, 12)
        box = Box.symmetric(3, 2.0, offset=True)
        _, cp_reward = optimal_constant_price(data)
        res = solve_mip(build_mip(data, box), max_nodes=1)
        assert res.incumbent_reward >= cp_reward - 1e-12

    def test_unbounded_family_within_large_box(self):
        for i in (2, 5):
            data, reference = generate_unbounded_family(i)
            box = Box.symmetric(2, 2.0 * i)
            res = solve_mip(build_mip(data, box), time_limit=30)
            assert res.status == "optimal"
            assert res.incumbent_reward == pytest.approx(1.0, abs=1e-9)
            assert np.allclose(res.incumbent.beta, reference.beta, atol=1e-6)

    def test_unbounded_family_clipped_by_unit_box(self):
        data, _ = generate_unbounded_family(3)
        res = solve_mip(build_mip(data, Box.symmetric(2, 1.0)), time_limit=30)
        assert res.status == "optimal"
        assert res.incumbent_reward < 1.0 - 1e-6


class TestRootNodeSolve:
    def test_integral_root_matches_full_solve(self):
        data = Dataset.from_arrays([[1.0]], [1.0], [0.2])
        box = Box(np.array([-1.0]), np.array([2.0]))
        full = solve_mip(build_mip(data, box))
        root = root_node_solve(build_mip(data, box))
        assert root.status == "optimal"
        assert root.nodes_explored == 1
        assert root.incumbent_reward == pytest.approx(full.incumbent_reward, abs=1e-12)
        assert root.dual_bound == pytest.approx(full.dual_bound, abs=1e-9)

    def test_incumbent_below_dual_bound(self, rng):
        for _ in range(5):
            data = random_dataset(rng, 2, 8)
            box = Box.symmetric(2, 1.0, offset=True)
            res = root_node_solve(build_mip(data, box))
            assert res.incumbent_reward <= res.dual_bound + 1e-9

    def test_dive_no_worse_than_extraction(self, rng):
        # the dive result is folded in via best-of, so the incumbent is at
        # least the plain root extraction
        from reserveopt import extract_model

        for _ in range(5):
            data = random_dataset(rng, 3, 10)
            box = Box.symmetric(3, 1.0)
            model = build_mip(data, box)
            root = solve_lp(model)
            extracted = extract_model(model.solution_dict(root.values), data, box)
            res = root_node_solve(model)
            assert res.incumbent_reward >= average_reward(extracted, data) - 1e-12

    def test_dual_bound_is_root_objective(self, rng):
        data = random_dataset(rng, 2, 6)
        box = Box.symmetric(2, 1.0)
        model = build_mip(data, box)
        res = root_node_solve(model)
        assert res.dual_bound == pytest.approx(solve_lp(model).objective, abs=1e-9)


class TestBreakpointOracle:
    def test_two_sample_example(self):
        data = Dataset.from_arrays([[1.0], [1.0]], [1.0, 2.0], [0.0, 0.0])
        beta, reward = breakpoint_oracle(data, Box(np.array([0.0]), np.array([3.0])))
        assert reward == pytest.approx(1.0)
        assert beta in (1.0, 2.0)

    def test_single_sample(self):
        data = Dataset.from_arrays([[2.0]], [1.5], [0.0])
        beta, reward = breakpoint_oracle(data, Box.symmetric(1, 2.0))
        assert reward == pytest.approx(1.5)
        assert beta == pytest.approx(0.75)

    def test_requires_one_dimension(self, rng):
        data = random_dataset(rng, 2, 3)
        with pytest.raises(ValueError):
            breakpoint_oracle(data, Box.symmetric(2, 1.0))

    def test_requires_no_offset(self, rng):
        data = random_dataset(rng, 1, 3)
        with pytest.raises(ValueError):
            breakpoint_oracle(data, Box.symmetric(1, 1.0, offset=True))

    def test_dominates_dense_grid(self, rng):
        for _ in range(10):
            data = random_dataset(rng, 1, 8)
            box = Box.symmetric(1, 2.0)
            _, oracle = breakpoint_oracle(data, box)
            grid = np.linspace(-2.0, 2.0, 4001)
            v = data.features_matrix[:, 0][None, :] * grid[:, None]
            r = np.where(v <= data.b2s, data.b2s, np.where(v <= data.b1s, v, 0.0))
            assert oracle >= r.mean(axis=1).max() - 1e-9
