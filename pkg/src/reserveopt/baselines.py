"""Comparison methods: the optimal constant price, projected gradient ascent
with a strong Wolfe line search, and a difference-of-convex surrogate fit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import AuctionSample, Box, Dataset, LinearModel, average_reward, reward_vector, variable_bounds
from .formulation import OptimizationModel
from .simplex import solve_lp

__all__ = [
    "DcParams",
    "WolfeParams",
    "optimal_constant_price",
    "subgradient",
    "gradient_ascent",
    "dc_surrogate",
    "surrogate_objective",
    "dca_fit",
]


@dataclass(frozen=True)
class DcParams:
    """Knobs of the difference-of-convex fit.

    ``gamma`` is the width of the surrogate's descending ramp relative to the
    top bid: the surrogate agrees with the true reward except on
    ``(b1, b1 * (1 + gamma)]`` where it falls linearly to zero.
    """

    gamma: float
    max_iters: int = 50
    tol: float = 1e-9

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.tol < 0:
            raise ValueError("tol must be nonnegative")


@dataclass(frozen=True)
class WolfeParams:
    """Strong Wolfe line-search constants plus the outer iteration budget."""

    c1: float = 1e-4
    c2: float = 0.9
    max_iters: int = 200
    initial_step: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.c1 < self.c2 < 1.0):
            raise ValueError("need 0 < c1 < c2 < 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.initial_step <= 0:
            raise ValueError("initial_step must be positive")


def optimal_constant_price(data: Dataset) -> tuple[float, float]:
    """Best single reserve price applied to every impression.

    The average reward as a function of a constant price is piecewise linear
    with breakpoints only at observed bids, and upper semicontinuous, so the
    exact maximum is found among the bid values and zero.  Ties go to the
    smallest price.
    """
    cand = np.unique(np.concatenate([data.b1s, data.b2s, [0.0]]))
    b1, b2, w, n = data.b1s, data.b2s, data.weights, data.n
    best_price, best_reward = 0.0, -math.inf
    for start in range(0, cand.size, 256):
        chunk = cand[start : start + 256]
        rewards = reward_vector(chunk[:, None], b1[None, :], b2[None, :]) @ w / n
        k = int(np.argmax(rewards))
        if rewards[k] > best_reward + 1e-15:
            best_price, best_reward = float(chunk[k]), float(rewards[k])
    return best_price, best_reward


def subgradient(model: LinearModel, data: Dataset) -> tuple[np.ndarray, float]:
    """Gradient of the average reward where it is differentiable.

    Only impressions on the middle (reserve-binding) piece contribute; the
    flat pieces contribute zero.  Returns the coefficient gradient and the
    offset component.
    """
    if model.d != data.d:
        raise ValueError(f"model dimension {model.d} does not match data dimension {data.d}")
    v = data.features_matrix @ model.beta + model.beta0
    active = (data.b2s < v) & (v <= data.b1s)
    wa = data.weights * active
    grad = data.features_matrix.T @ wa / data.n
    return grad, float(wa.sum() / data.n)


def _project(beta: np.ndarray, beta0: float, box: Box) -> LinearModel:
    return LinearModel(
        np.clip(beta, box.lower, box.upper),
        min(max(beta0, box.offset_lower), box.offset_upper),
    )


def gradient_ascent(
    data: Dataset, box: Box, init: LinearModel, params: WolfeParams = WolfeParams()
) -> LinearModel:
    """Projected subgradient ascent with a strong Wolfe line search.

    Each outer step searches along the current subgradient for a step length
    meeting the (ascent versions of the) strong Wolfe conditions; because the
    objective is discontinuous the search frequently fails, in which case a
    geometric backtracking pass looks for any strictly improving step.  The
    best iterate seen is returned, so the result never scores below ``init``.
    """
    if not box.contains(init):
        raise ValueError("initial model lies outside the box")
    cur = _project(init.beta, init.beta0, box)
    cur_val = average_reward(cur, data)
    best, best_val = cur, cur_val
    for _ in range(params.max_iters):
        g, g0 = subgradient(cur, data)
        if not box.has_offset:
            g0 = 0.0
        norm = math.sqrt(float(g @ g) + g0 * g0)
        if norm < 1e-14:
            break

        def phi(t: float) -> tuple[LinearModel, float]:
            trial = _project(cur.beta + t * g, cur.beta0 + t * g0, box)
            return trial, average_reward(trial, data)

        def dphi(trial: LinearModel) -> float:
            tg, tg0 = subgradient(trial, data)
            if not box.has_offset:
                tg0 = 0.0
            return float(tg @ g) + tg0 * g0

        slope0 = norm * norm
        step = _strong_wolfe(phi, dphi, cur_val, slope0, params)
        if step is None:
            step = _backtrack(phi, cur_val, params.initial_step)
        if step is None:
            break
        cur, cur_val = phi(step)
        if cur_val > best_val:
            best, best_val = cur, cur_val
    return best


def _strong_wolfe(phi, dphi, f0, slope0, params: WolfeParams, max_evals: int = 20):
    """Bracket-and-zoom search for an ascent step meeting strong Wolfe."""
    c1, c2 = params.c1, params.c2
    t_prev, f_prev = 0.0, f0
    t = params.initial_step

    def zoom(t_lo, f_lo, t_hi):
        for _ in range(max_evals):
            t_mid = 0.5 * (t_lo + t_hi)
            trial, f_mid = phi(t_mid)
            if f_mid < f0 + c1 * t_mid * slope0 or f_mid <= f_lo:
                t_hi = t_mid
            else:
                g_mid = dphi(trial)
                if abs(g_mid) <= c2 * slope0:
                    return t_mid
                if g_mid * (t_hi - t_lo) <= 0:
                    t_hi = t_lo
                t_lo, f_lo = t_mid, f_mid
            if abs(t_hi - t_lo) < 1e-14:
                break
        return t_lo if f_lo > f0 else None

    for k in range(max_evals):
        trial, f = phi(t)
        if f < f0 + c1 * t * slope0 or (k > 0 and f <= f_prev):
            return zoom(t_prev, f_prev, t)
        g = dphi(trial)
        if abs(g) <= c2 * slope0:
            return t
        if g <= 0:
            return zoom(t, f, t_prev)
        t_prev, f_prev = t, f
        t *= 2.0
    return None


def _backtrack(phi, f0, initial_step, shrink: float = 0.5, max_evals: int = 40):
    t = initial_step
    for _ in range(max_evals):
        _, f = phi(t)
        if f > f0 + 1e-12:
            return t
        t *= shrink
    return None


def dc_surrogate(v: float, sample: AuctionSample, gamma: float) -> float:
    """Continuous surrogate of the reward: identical off the ramp, and a
    linear descent to zero on ``(b1, b1 * (1 + gamma)]``."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    b1, b2 = sample.b1, sample.b2
    v = float(v)
    if v <= b2:
        return b2
    if v <= b1:
        return v
    return max(0.0, b1 - (v - b1) / gamma)


def _surrogate_vector(v: np.ndarray, b1: np.ndarray, b2: np.ndarray, gamma: float) -> np.ndarray:
    ramp = np.maximum(0.0, b1 - (v - b1) / gamma)
    return np.where(v <= b2, b2, np.where(v <= b1, v, ramp))


def surrogate_objective(model: LinearModel, data: Dataset, gamma: float) -> float:
    """Average of the surrogate reward over the dataset."""
    v = data.features_matrix @ model.beta + model.beta0
    return float(data.weights @ _surrogate_vector(v, data.b1s, data.b2s, gamma) / data.n)


def dca_fit(
    data: Dataset,
    box: Box,
    params: DcParams,
    init: LinearModel,
    trace: list | None = None,
) -> LinearModel:
    """Difference-of-convex ascent on the surrogate reward.

    Per impression the surrogate splits as ``f - g`` with convex
    ``f(v) = b2 + max(0, v - b2) + max(0, v - b1 (1 + gamma)) / gamma`` and
    convex ``g(v) = (1 + 1/gamma) max(0, v - b1)``.  Each iteration
    linearizes the concave part (``f`` summed over the data) at the current
    iterate and solves the resulting piecewise-linear program exactly as an
    LP, with the hinges of ``g`` in epigraph form.  With exact subproblem
    solves the surrogate objective never decreases.  The iterate with the
    best true average reward (including ``init``) is returned; ``trace``
    receives the surrogate objective of each iterate when provided.
    """
    if not box.contains(init):
        raise ValueError("initial model lies outside the box")
    gamma = params.gamma
    b1, b2, w_mat = data.b1s, data.b2s, data.features_matrix
    weights, n = data.weights, data.n
    uppers = np.array([variable_bounds(s.features, box)[1] for s in data.samples])
    hinge_cap = np.maximum(0.0, uppers - b1)
    ramp_top = b1 * (1.0 + gamma)

    cur = init
    cur_surr = surrogate_objective(cur, data, gamma)
    if trace is not None:
        trace.append(cur_surr)
    best, best_true = cur, average_reward(cur, data)
    for _ in range(params.max_iters):
        v = w_mat @ cur.beta + cur.beta0
        # upper subgradient at the hinge kinks, so the iteration can leave
        # the flat second-price region through its boundary
        slope = (v >= b2).astype(float) + (v >= ramp_top) / gamma
        wa = weights * slope
        s = w_mat.T @ wa / n
        s0 = float(wa.sum() / n) if box.has_offset else 0.0

        sub = OptimizationModel()
        beta_vars = [
            sub.add_variable(f"beta[{j}]", box.lower[j], box.upper[j]) for j in range(data.d)
        ]
        beta0_var = None
        if box.has_offset:
            beta0_var = sub.add_variable("beta0", box.offset_lower, box.offset_upper)
        hinge_coef = weights * (1.0 + 1.0 / gamma) / n
        for i in range(data.n_rows):
            t_i = sub.add_variable(f"t[{i}]", 0.0, hinge_cap[i])
            row = {t_i: 1.0}
            for j, wj in enumerate(data.samples[i].features):
                if wj != 0.0:
                    row[beta_vars[j]] = -wj
            if beta0_var is not None:
                row[beta0_var] = -1.0
            sub.add_constraint(row, ">=", -b1[i])
            sub.set_objective(t_i, -hinge_coef[i])
        for j in range(data.d):
            if s[j] != 0.0:
                sub.set_objective(beta_vars[j], s[j])
        if beta0_var is not None and s0 != 0.0:
            sub.set_objective(beta0_var, s0)

        sol = solve_lp(sub)
        if sol.status != "optimal":
            break
        beta_new = sol.values[: data.d]
        beta0_new = float(sol.values[beta0_var]) if beta0_var is not None else 0.0
        nxt = LinearModel(beta_new, beta0_new)
        nxt_surr = surrogate_objective(nxt, data, gamma)
        if trace is not None:
            trace.append(nxt_surr)
        true_reward = average_reward(nxt, data)
        if true_reward > best_true:
            best, best_true = nxt, true_reward
        if nxt_surr - cur_surr < params.tol:
            cur = nxt
            break
        cur, cur_surr = nxt, nxt_surr
    return best
