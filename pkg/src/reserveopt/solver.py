"""Branch-and-bound over the exact reserve-price model, plus a root-node
heuristic mode and an exact one-dimensional oracle.

The tree search is best-bound with most-fractional branching on the piece
indicators.  Incumbent rewards are always obtained by re-scoring the policy
extracted from a node solution with the true average reward, never by
trusting the relaxation's reward variables, so closure artifacts at the
discontinuity cannot inflate them.  Every candidate policy additionally goes
through an exact coordinate-wise breakpoint ascent, which is cheap and often
lands on the optimum long before the bound closes.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass

import numpy as np

from .baselines import optimal_constant_price
from .core import Box, Dataset, LinearModel, average_reward, reward_vector
from .formulation import OptimizationModel, extract_model
from .simplex import LpSolution, solve_lp

__all__ = ["MipResult", "solve_mip", "root_node_solve", "breakpoint_oracle"]

INTEGRALITY_TOL = 1e-6
DEFAULT_GAP_TOL = 1e-6


@dataclass
class MipResult:
    """Outcome of a mixed-integer solve.

    ``incumbent_reward`` is the true average reward of ``incumbent`` (or
    ``-inf`` when none was found) and ``dual_bound`` is a proven upper bound
    on the optimal reward.
    """

    incumbent: LinearModel | None
    incumbent_reward: float
    dual_bound: float
    nodes_explored: int
    status: str  # "optimal" | "feasible_time_limit" | "infeasible"
    wall_seconds: float = 0.0
    root_objective: float | None = None


def _require_meta(model: OptimizationModel):
    if model.meta is None:
        raise ValueError("model was not produced by build_mip/build_lp; missing problem context")
    return model.meta


def _check_integer_vars(model: OptimizationModel) -> list[int]:
    ints = model.integer_indices()
    for j in ints:
        if model.lower[j] < -1e-12 or model.upper[j] > 1 + 1e-12:
            raise ValueError(f"integer variable {model.names[j]!r} is not binary-bounded")
    return ints


def _coordinate_polish(
    model: LinearModel, data: Dataset, box: Box, rounds: int = 3
) -> tuple[LinearModel, float]:
    """Exact coordinate ascent over the piecewise-linear reward.

    Along one coordinate the average reward is piecewise linear and upper
    semicontinuous, so its maximum over the box segment is attained at a
    breakpoint (where some impression's value crosses a bid) or a segment
    endpoint.  Sweeping coordinates with this exact line maximization can only
    improve the reward and is deterministic.
    """
    w_mat = data.features_matrix
    b1, b2 = data.b1s, data.b2s
    weights = data.weights
    n = data.n
    beta = model.beta.copy()
    beta0 = model.beta0
    v = w_mat @ beta + beta0

    def score(values: np.ndarray) -> float:
        return float(weights @ reward_vector(values, b1, b2) / n)

    best = score(v)
    coords: list[int] = [j for j in range(data.d) if box.lower[j] < box.upper[j]]
    use_offset = box.has_offset and box.offset_lower < box.offset_upper
    for _ in range(rounds):
        improved = False
        for j in coords + ([-1] if use_offset else []):
            if j >= 0:
                col = w_mat[:, j]
                cur, lo, up = beta[j], box.lower[j], box.upper[j]
            else:
                col = np.ones(data.n_rows)
                cur, lo, up = beta0, box.offset_lower, box.offset_upper
            nz = col != 0.0
            if not nz.any():
                continue
            with np.errstate(divide="ignore", invalid="ignore"):
                cand = np.concatenate(
                    [
                        cur + (b1[nz] - v[nz]) / col[nz],
                        cur + (b2[nz] - v[nz]) / col[nz],
                        [lo, up],
                    ]
                )
            cand = np.clip(cand[np.isfinite(cand)], lo, up)
            if cand.size == 0:
                continue
            trial_v = v[None, :] + (cand[:, None] - cur) * col[None, :]
            rewards = reward_vector(trial_v, b1[None, :], b2[None, :])
            totals = rewards @ weights / n
            k = int(np.argmax(totals))
            if totals[k] > best + 1e-12:
                best = float(totals[k])
                delta = cand[k] - cur
                v = v + delta * col
                if j >= 0:
                    beta[j] = cand[k]
                else:
                    beta0 = cand[k]
                improved = True
        if not improved:
            break
    return LinearModel(beta, beta0), best


def _piece_assignment(v: np.ndarray, b1: np.ndarray, b2: np.ndarray) -> np.ndarray:
    """Index of the closed-graph piece containing each value (0, 1, or 2)."""
    return np.where(v <= b2, 0, np.where(v <= b1 + 1e-12, 1, 2))


def _assignment_lp(data: Dataset, box: Box, assign: np.ndarray) -> LinearModel | None:
    """Exact maximization of the reward with every impression pinned to a piece.

    Once the pieces are fixed the problem collapses to a linear program over
    the policy alone: paying impressions contribute their reserve to the
    objective subject to window rows, the others only contribute windows.
    Returns None when the requested assignment is infeasible inside the box.
    """
    d = data.d
    w_mat, b1, b2 = data.features_matrix, data.b1s, data.b2s
    lp = OptimizationModel()
    betas = [lp.add_variable(f"beta[{j}]", box.lower[j], box.upper[j]) for j in range(d)]
    beta0 = lp.add_variable("beta0", box.offset_lower, box.offset_upper) if box.has_offset else None
    obj = np.zeros(d + 1)
    for i in range(data.n_rows):
        coeffs = {betas[j]: w_mat[i, j] for j in range(d) if w_mat[i, j] != 0.0}
        if beta0 is not None:
            coeffs[beta0] = 1.0
        if not coeffs:
            continue  # zero feature row: the reserve is fixed at zero anyway
        piece = assign[i]
        if piece == 0:
            lp.add_constraint(coeffs, "<=", b2[i])
        elif piece == 1:
            lp.add_constraint(coeffs, ">=", b2[i])
            lp.add_constraint(dict(coeffs), "<=", b1[i])
            obj[:d] += data.weights[i] * w_mat[i] / data.n
            obj[d] += data.weights[i] / data.n
        else:
            lp.add_constraint(coeffs, ">=", b1[i])
    for j in range(d):
        if obj[j] != 0.0:
            lp.set_objective(betas[j], obj[j])
    if beta0 is not None and obj[d] != 0.0:
        lp.set_objective(beta0, obj[d])
    sol = solve_lp(lp)
    if sol.status != "optimal":
        return None
    b0 = float(sol.values[beta0]) if beta0 is not None else 0.0
    return LinearModel(sol.values[:d].copy(), b0)


def _local_search(
    model: LinearModel, data: Dataset, box: Box, max_rounds: int = 15
) -> tuple[LinearModel, float]:
    """Coordinate polish alternated with exact piece-restricted re-fits.

    Re-fitting the policy for the pieces its reserves currently occupy can
    only improve the true reward (the current point stays feasible for the
    restricted program), so the loop ascends monotonically and terminates.
    """
    cur, cur_reward = _coordinate_polish(model, data, box)
    w_mat = data.features_matrix
    for _ in range(max_rounds):
        v = w_mat @ cur.beta + cur.beta0
        refit = _assignment_lp(data, box, _piece_assignment(v, data.b1s, data.b2s))
        if refit is None:
            break
        cand, cand_reward = _coordinate_polish(refit, data, box)
        if cand_reward <= cur_reward + 1e-10:
            break
        cur, cur_reward = cand, cand_reward
    return cur, cur_reward


def _heuristic_starts(data: Dataset, box: Box) -> list[LinearModel]:
    """Deterministic warm-start policies: shrunk least-squares fits that aim
    every reserve at a fraction of its top bid."""
    w_mat = data.features_matrix
    cols = [w_mat]
    if box.has_offset:
        cols.append(np.ones((data.n_rows, 1)))
    design = np.hstack(cols)
    starts = []
    for q in (0.75, 0.8, 0.85, 0.9, 0.95, 1.0):
        coef, *_ = np.linalg.lstsq(design, q * data.b1s, rcond=None)
        beta = np.clip(coef[: data.d], box.lower, box.upper)
        beta0 = 0.0
        if box.has_offset:
            beta0 = float(min(max(coef[data.d], box.offset_lower), box.offset_upper))
        starts.append(LinearModel(beta, beta0))
    return starts


class _Incumbent:
    def __init__(self, data: Dataset, box: Box):
        self.data = data
        self.box = box
        self.model: LinearModel | None = None
        self.reward = -math.inf

    def offer(self, model: LinearModel, effort: str = "polish") -> None:
        """Score a feasible policy, optionally improving it first.

        ``effort`` is "none" (score as-is), "polish" (coordinate ascent), or
        "search" (polish plus piece-restricted re-fitting).
        """
        reward = average_reward(model, self.data)
        if effort == "search":
            improved, improved_reward = _local_search(model, self.data, self.box)
        elif effort == "polish":
            improved, improved_reward = _coordinate_polish(model, self.data, self.box)
        else:
            improved, improved_reward = model, reward
        if improved_reward > reward:
            model, reward = improved, improved_reward
        if reward > self.reward + 1e-12:
            self.model = model
            self.reward = reward


def _seed_constant_price(inc: _Incumbent, data: Dataset, box: Box) -> None:
    """Warm start with the best constant policy when the offset is available."""
    if not box.has_offset:
        return
    price, _ = optimal_constant_price(data)
    price = min(max(price, box.offset_lower), box.offset_upper)
    inc.offer(LinearModel(np.zeros(data.d), price))


def _fractionality(values: np.ndarray, ints: list[int]) -> tuple[float, int]:
    """Max distance to integrality and the most fractional variable index."""
    worst = 0.0
    arg = -1
    for j in ints:
        frac = abs(values[j] - round(values[j]))
        if frac > worst + 1e-15:
            worst = frac
            arg = j
    return worst, arg


def solve_mip(
    model: OptimizationModel,
    time_limit: float | None = None,
    gap_tol: float = DEFAULT_GAP_TOL,
    max_nodes: int | None = None,
    log=None,
) -> MipResult:
    """Best-bound branch-and-bound on a model built by ``build_mip``.

    Branches fix the most fractional piece indicator to 0 or 1 (ties broken
    by lowest variable index).  Nodes whose relaxation bound cannot beat the
    incumbent by more than ``gap_tol`` are pruned.  On timeout or node budget
    exhaustion the best incumbent and the proven global bound are returned
    with status ``feasible_time_limit``.
    """
    meta = _require_meta(model)
    ints = _check_integer_vars(model)
    if time_limit is not None and time_limit <= 0:
        raise ValueError("time_limit must be positive")
    start = time.monotonic()
    data, box = meta.data, meta.box
    inc = _Incumbent(data, box)
    _seed_constant_price(inc, data, box)

    def out_of_budget(nodes: int) -> bool:
        if time_limit is not None and time.monotonic() - start > time_limit:
            return True
        return max_nodes is not None and nodes >= max_nodes

    def process(sol: LpSolution) -> tuple[bool, float]:
        """Score the node's policy; return (is_integral, node_bound)."""
        inc.offer(extract_model(model.solution_dict(sol.values), data, box), effort="search")
        frac, _ = _fractionality(sol.values, ints)
        return frac <= INTEGRALITY_TOL, sol.objective

    root = solve_lp(model)
    nodes = 1
    if root.status == "infeasible":
        return MipResult(None, -math.inf, -math.inf, nodes, "infeasible",
                         time.monotonic() - start)
    if root.status == "unbounded":
        raise RuntimeError("relaxation is unbounded; the parameter box must be bounded")
    integral, root_bound = process(root)
    for warm in _heuristic_starts(data, box):
        if out_of_budget(nodes):
            break
        inc.offer(warm, effort="search")
    heap: list[tuple[float, int, dict, np.ndarray]] = []
    counter = 0
    if not integral and root_bound > inc.reward + gap_tol:
        heapq.heappush(heap, (-root_bound, counter, {}, root.values))
    while heap:
        if out_of_budget(nodes):
            bound = max(-heap[0][0], inc.reward) if heap else inc.reward
            status = "feasible_time_limit" if inc.model is not None else "infeasible"
            if log:
                log(f"budget exhausted: nodes={nodes} bound={bound:.6g} incumbent={inc.reward:.6g}")
            return MipResult(inc.model, inc.reward, bound, nodes, status,
                             time.monotonic() - start, root_bound)
        neg_bound, _, overrides, values = heapq.heappop(heap)
        bound = -neg_bound
        if bound <= inc.reward + gap_tol:
            break  # best-bound order: everything left is pruned too
        _, branch_var = _fractionality(values, ints)
        for fixed in (0.0, 1.0):
            child_over = dict(overrides)
            child_over[branch_var] = (fixed, fixed)
            sol = solve_lp(model, bound_overrides=child_over)
            nodes += 1
            if sol.status != "optimal":
                continue
            child_integral, child_bound = process(sol)
            child_bound = min(child_bound, bound)  # a child never beats its parent
            if not child_integral and child_bound > inc.reward + gap_tol:
                counter += 1
                heapq.heappush(heap, (-child_bound, counter, child_over, sol.values))
        if log:
            top = -heap[0][0] if heap else inc.reward
            log(f"nodes={nodes} open={len(heap)} bound={top:.6g} incumbent={inc.reward:.6g}")
    dual = max(-heap[0][0], inc.reward) if heap else inc.reward
    status = "optimal" if inc.model is not None else "infeasible"
    return MipResult(inc.model, inc.reward, dual, nodes, status,
                     time.monotonic() - start, root_bound)


def root_node_solve(
    model: OptimizationModel,
    gap_tol: float = DEFAULT_GAP_TOL,
    time_limit: float | None = None,
) -> MipResult:
    """Root relaxation plus a single dive, without any tree search.

    Produces an incumbent from (a) the policy extracted from the root
    solution and (b) a diving pass that repeatedly fixes the largest
    fractional piece indicator to one and re-solves; the better of the two by
    true average reward is returned, with the root objective as dual bound.
    """
    meta = _require_meta(model)
    ints = _check_integer_vars(model)
    start = time.monotonic()
    data, box = meta.data, meta.box
    root = solve_lp(model)
    nodes = 1
    if root.status == "infeasible":
        return MipResult(None, -math.inf, -math.inf, nodes, "infeasible",
                         time.monotonic() - start)
    if root.status == "unbounded":
        raise RuntimeError("relaxation is unbounded; the parameter box must be bounded")
    inc = _Incumbent(data, box)
    inc.offer(extract_model(model.solution_dict(root.values), data, box), effort="none")

    overrides: dict[int, tuple[float, float]] = {}
    values = root.values
    while True:
        if time_limit is not None and time.monotonic() - start > time_limit:
            break
        fractional = [(values[j], j) for j in ints
                      if j not in overrides
                      and abs(values[j] - round(values[j])) > INTEGRALITY_TOL]
        if not fractional:
            break
        _, pick = max(fractional, key=lambda item: (item[0], -item[1]))
        overrides[pick] = (1.0, 1.0)
        sol = solve_lp(model, bound_overrides=overrides)
        nodes += 1
        if sol.status != "optimal":
            break
        values = sol.values
        inc.offer(extract_model(model.solution_dict(values), data, box), effort="none")
    gap_closed = inc.reward >= root.objective - gap_tol
    status = "optimal" if gap_closed else "feasible_time_limit"
    return MipResult(inc.model, inc.reward, root.objective, nodes, status,
                     time.monotonic() - start, root.objective)


def breakpoint_oracle(data: Dataset, box: Box) -> tuple[float, float]:
    """Exact optimum for one-dimensional instances without an offset.

    The average reward is piecewise linear in the single coefficient with
    pieces linear and the function upper semicontinuous, so its maximum over
    the box is attained where some impression's value crosses one of its bids
    or at a box endpoint.  Enumerating those candidates is exact.
    """
    if data.d != 1:
        raise ValueError(f"breakpoint oracle requires d=1, got d={data.d}")
    if box.has_offset:
        raise ValueError("breakpoint oracle requires the offset to be disabled")
    lo, up = float(box.lower[0]), float(box.upper[0])
    w = data.features_matrix[:, 0]
    nz = w != 0.0
    cand = np.concatenate([data.b1s[nz] / w[nz], data.b2s[nz] / w[nz], [lo, up]])
    cand = np.unique(np.clip(cand, lo, up))
    best_beta, best_reward = lo, -math.inf
    for beta in cand:
        r = float(data.weights @ reward_vector(w * beta, data.b1s, data.b2s) / data.n)
        if r > best_reward + 1e-15:
            best_beta, best_reward = float(beta), r
    return best_beta, best_reward
