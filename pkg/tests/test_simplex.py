import numpy as np
import pytest
from scipy.optimize import linprog

from reserveopt import (
    AuctionSample,
    IterationLimitError,
    OptimizationModel,
    build_sample_block,
    solve_lp,
)


def make_model(A, senses, rhs, c, lo, up):
    model = OptimizationModel()
    n = len(c)
    for j in range(n):
        model.add_variable(f"x{j}", lo[j], up[j])
    for i in range(len(rhs)):
        model.add_constraint({j: A[i][j] for j in range(n)}, senses[i], rhs[i])
    for j in range(n):
        model.set_objective(j, c[j])
    return model


def reference(A, senses, rhs, c, lo, up):
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for i, s in enumerate(senses):
        if s == "<=":
            A_ub.append(A[i])
            b_ub.append(rhs[i])
        elif s == ">=":
            A_ub.append([-a for a in A[i]])
            b_ub.append(-rhs[i])
        else:
            A_eq.append(A[i])
            b_eq.append(rhs[i])
    res = linprog(
        [-x for x in c],
        A_ub=np.array(A_ub) if A_ub else None,
        b_ub=np.array(b_ub) if b_ub else None,
        A_eq=np.array(A_eq) if A_eq else None,
        b_eq=np.array(b_eq) if b_eq else None,
        bounds=list(zip(lo, up)),
        method="highs",
    )
    status = {0: "optimal", 2: "infeasible", 3: "unbounded"}.get(res.status, "other")
    return status, (-res.fun if res.status == 0 else None)


def test_trivial_box():
    model = make_model([[1.0]], ["<="], [1.0], [1.0], [0.0], [10.0])
    sol = solve_lp(model)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(1.0)
    assert sol.is_vertex


def test_single_block_hull_peak():
    # relaxed block with b2=0, b1=1, l=-1, u=2: the hull peaks at (v, y) = (1, 1)
    model = OptimizationModel()
    block = build_sample_block(
        model, AuctionSample(np.array([1.0]), 1.0, 0.0), -1.0, 2.0, integral=False
    )
    model.set_objective(block.y, 1.0)
    sol = solve_lp(model)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(1.0, abs=1e-9)
    assert sol.values[block.v] == pytest.approx(1.0, abs=1e-9)


def test_hull_edges_at_interior_value():
    # same block with v pinned at 0: hull allows y up to min((v+1)/2, 2-v) = 1/2
    model = OptimizationModel()
    block = build_sample_block(
        model, AuctionSample(np.array([1.0]), 1.0, 0.0), -1.0, 2.0, integral=False
    )
    model.set_objective(block.y, 1.0)
    sol = solve_lp(model, bound_overrides={block.v: (0.0, 0.0)})
    assert sol.objective == pytest.approx(0.5, abs=1e-9)


def test_infeasible():
    model = make_model([[1.0], [1.0]], [">=", "<="], [1.0, 0.0], [1.0], [0.0], [5.0])
    assert solve_lp(model).status == "infeasible"


def test_unbounded():
    model = OptimizationModel()
    model.add_variable("x")
    z = model.add_variable("z", 0.0, 1.0)
    model.add_constraint({z: 1.0}, "<=", 1.0)
    model.set_objective(0, 1.0)
    assert solve_lp(model).status == "unbounded"


def test_iteration_limit():
    model = make_model(
        [[1.0, 1.0], [1.0, -1.0]], ["<=", "<="], [2.0, 0.5], [1.0, 1.0],
        [0.0, 0.0], [5.0, 5.0],
    )
    with pytest.raises(IterationLimitError):
        solve_lp(model, max_iters=0)


def test_bound_overrides_infeasible_range():
    model = make_model([[1.0]], ["<="], [1.0], [1.0], [0.0], [1.0])
    sol = solve_lp(model, bound_overrides={0: (2.0, 1.0)})
    assert sol.status == "infeasible"


def test_fixed_variables_respected():
    model = make_model(
        [[1.0, 1.0]], ["<="], [10.0], [1.0, 1.0], [0.0, 0.25], [5.0, 0.25]
    )
    sol = solve_lp(model)
    assert sol.values[1] == 0.25
    assert sol.objective == pytest.approx(5.25)


def test_free_variable_in_equality():
    model = OptimizationModel()
    x = model.add_variable("x")  # free
    y = model.add_variable("y", 0.0, 1.0)
    model.add_constraint({x: 1.0, y: 1.0}, "=", 0.3)
    model.set_objective(y, 1.0)
    model.set_objective(x, -2.0)
    sol = solve_lp(model)
    assert sol.status == "optimal"
    # maximize -2x + y with x = 0.3 - y: obj = -0.6 + 3y -> y = 1, x = -0.7
    assert sol.objective == pytest.approx(2.4, abs=1e-9)
    assert sol.values[0] == pytest.approx(-0.7, abs=1e-9)


def test_degenerate_cycling_prone_instance():
    # classic degeneracy stress: many ties at the origin vertex
    A = [
        [0.5, -5.5, -2.5, 9.0],
        [0.5, -1.5, -0.5, 1.0],
        [1.0, 0.0, 0.0, 0.0],
    ]
    senses = ["<=", "<=", "<="]
    rhs = [0.0, 0.0, 1.0]
    c = [10.0, -57.0, -9.0, -24.0]
    lo = [0.0] * 4
    up = [np.inf] * 4
    sol = solve_lp(make_model(A, senses, rhs, c, lo, up))
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(1.0, abs=1e-8)


def test_vertex_has_bounded_support(rng):
    # at a basic solution at most m variables sit strictly between bounds
    for _ in range(30):
        m = int(rng.integers(1, 8))
        n = int(rng.integers(1, 9))
        A = rng.normal(size=(m, n)).round(2)
        lo = rng.uniform(-2, 0, n).round(2)
        up = lo + rng.uniform(0.1, 3, n).round(2)
        senses = [str(rng.choice(["<=", "=", ">="])) for _ in range(m)]
        x0 = rng.uniform(lo, up)
        rhs = A @ x0
        c = rng.normal(size=n).round(2)
        sol = solve_lp(make_model(A, senses, rhs, c, lo, up))
        if sol.status != "optimal":
            continue
        strict = np.sum((sol.values > lo + 1e-9) & (sol.values < up - 1e-9))
        assert strict <= m


def test_matches_reference_solver(rng):
    agree = 0
    for _ in range(200):
        m = int(rng.integers(1, 9))
        n = int(rng.integers(1, 10))
        A = (rng.normal(size=(m, n)) * 2).round(2)
        A[rng.random(size=A.shape) < 0.3] = 0.0
        lo = rng.uniform(-3, 0, n).round(2)
        up = lo + rng.uniform(0, 4, n).round(2)
        for j in range(n):
            r = rng.random()
            if r < 0.08:
                lo[j] = -np.inf
            elif r < 0.12:
                up[j] = np.inf
            elif r < 0.16:
                up[j] = lo[j]
        senses = [str(rng.choice(["<=", "=", ">="])) for _ in range(m)]
        x0 = np.array([rng.uniform(max(l, -3), min(u, 3)) for l, u in zip(lo, up)])
        rhs = A @ x0 + rng.normal(size=m).round(2) * (rng.random(m) < 0.7)
        c = rng.normal(size=n).round(2)
        mine = solve_lp(make_model(A, senses, rhs, c, lo, up))
        ref_status, ref_obj = reference(A, senses, rhs, c, lo, up)
        assert mine.status == ref_status
        if ref_status == "optimal":
            assert mine.objective == pytest.approx(ref_obj, abs=1e-6, rel=1e-6)
            # feasibility audit of the returned point
            Ax = A @ mine.values
            for i, s in enumerate(senses):
                if s == "<=":
                    assert Ax[i] <= rhs[i] + 1e-7
                elif s == ">=":
                    assert Ax[i] >= rhs[i] - 1e-7
                else:
                    assert Ax[i] == pytest.approx(rhs[i], abs=1e-7)
            assert np.all(mine.values >= lo - 1e-7)
            assert np.all(mine.values <= up + 1e-7)
            agree += 1
    assert agree > 100  # plenty of optimal instances exercised


def test_deterministic_repeat(rng):
    A = rng.normal(size=(6, 8)).round(2)
    lo = np.full(8, -1.0)
    up = np.full(8, 1.0)
    senses = ["<=", ">=", "=", "<=", ">=", "<="]
    rhs = (A @ rng.uniform(-1, 1, 8)).round(2)
    c = rng.normal(size=8).round(2)
    a = solve_lp(make_model(A, senses, rhs, c, lo, up))
    b = solve_lp(make_model(A, senses, rhs, c, lo, up))
    assert a.status == b.status
    assert a.iterations == b.iterations
    assert np.array_equal(a.values, b.values)


def test_integrality_flags_ignored():
    model = OptimizationModel()
    x = model.add_variable("x", 0.0, 1.0, integer=True)
    model.add_constraint({x: 1.0}, "<=", 0.5)
    model.set_objective(x, 1.0)
    sol = solve_lp(model)
    assert sol.objective == pytest.approx(0.5)
