"""Self-contained bounded-variable primal simplex.

Two-phase revised simplex over a sparse constraint matrix: basis factors come
from SuperLU and are kept current between refactorizations with product-form
eta updates.  Nonbasic variables rest at a finite bound (or at zero when
free); steps are limited by the classic ratio test extended with
bound-to-bound flips.  Dantzig pricing is used by default and Bland's rule
engages after a run of degenerate pivots, which keeps the method finite and
deterministic.

Integrality markers on the model are ignored here; this module always solves
the relaxation and returns a basic (vertex) solution at optimality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .formulation import OptimizationModel

__all__ = ["LpSolution", "IterationLimitError", "solve_lp"]

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-8
DEGENERATE_STEP = 1e-11
BLAND_TRIGGER = 60
REFACTOR_EVERY = 80

# variable status codes
_AT_LOWER = 0
_AT_UPPER = 1
_FREE = 2
_BASIC = 3


class IterationLimitError(RuntimeError):
    """Raised when the simplex exceeds its iteration budget."""


@dataclass
class LpSolution:
    """Solution of a linear relaxation.

    ``values`` are the structural variable values in declaration order.
    ``is_vertex`` is true when the values come from a simplex basis, as they
    always do at optimality.
    """

    values: np.ndarray
    objective: float
    status: str  # "optimal" | "infeasible" | "unbounded"
    is_vertex: bool
    iterations: int = 0

    def __post_init__(self):
        if self.status not in ("optimal", "infeasible", "unbounded"):
            raise ValueError(f"unknown LP status {self.status!r}")


def solve_lp(
    model: OptimizationModel,
    bound_overrides: dict[int, tuple[float, float]] | None = None,
    max_iters: int | None = None,
) -> LpSolution:
    """Maximize the model objective over its linear constraints and bounds.

    ``bound_overrides`` maps structural variable indices to replacement
    ``(lower, upper)`` pairs; branch-and-bound uses this to fix indicator
    variables without copying the model.  Raises
    :class:`IterationLimitError` when ``max_iters`` pivots are exhausted.
    """
    lower, upper = model.bounds_arrays()
    if bound_overrides:
        for var, (lo, up) in bound_overrides.items():
            lower[var] = lo
            upper[var] = up
        if np.any(lower > upper):
            return LpSolution(
                values=np.zeros(model.num_variables),
                objective=-math.inf,
                status="infeasible",
                is_vertex=False,
            )
    worker = _Simplex(model, lower, upper, max_iters)
    return worker.solve()


def _structural_csc(model: OptimizationModel) -> sp.csc_matrix:
    data, ri, ci = [], [], []
    for i, (row, _sense, _rhs) in enumerate(model.rows):
        for var, coef in row.items():
            ri.append(i)
            ci.append(var)
            data.append(coef)
    return sp.csc_matrix(
        (data, (ri, ci)), shape=(model.num_constraints, model.num_variables)
    )


class _Simplex:
    def __init__(self, model: OptimizationModel, lower, upper, max_iters):
        m = model.num_constraints
        n = model.num_variables
        self.m = m
        self.n_struct = n
        senses = [row[1] for row in model.rows]
        self.rhs = np.array([row[2] for row in model.rows], dtype=float)
        # slack column per row: <= gets [0, inf), >= gets (-inf, 0], = gets [0, 0]
        slack_lo = np.array([0.0 if s != ">=" else -math.inf for s in senses])
        slack_up = np.array([math.inf if s == "<=" else 0.0 for s in senses])
        self.senses = senses
        self.n_total = n + 2 * m
        self.art_start = n + m
        self.lower = np.concatenate([lower, slack_lo, np.zeros(m)])
        self.upper = np.concatenate([upper, slack_up, np.full(m, math.inf)])
        self.c_struct = model.objective_array()
        if max_iters is None:
            max_iters = max(50_000, 40 * (m + n))
        self.max_iters = int(max_iters)
        self.iterations = 0
        self._model = model
        self.lu = None
        self.etas: list[tuple[int, np.ndarray]] = []
        self.basis = np.empty(m, dtype=np.int64)
        self.vstat = np.empty(self.n_total, dtype=np.int8)
        self.x = np.zeros(self.n_total)
        self._degenerate_streak = 0
        self.A: sp.csc_matrix | None = None
        self.AT: sp.csr_matrix | None = None

    # -- setup ---------------------------------------------------------------

    def _initial_point(self) -> None:
        """Choose starting values and a crash basis of slacks plus artificials.

        Nonbasic structural variables start at the finite bound nearest zero.
        A row whose residual fits inside its slack bounds gets its slack as the
        initial basic variable; only the remaining rows receive artificials.
        """
        n, m = self.n_struct, self.m
        for j in range(n):
            lo, up = self.lower[j], self.upper[j]
            if math.isfinite(lo) and math.isfinite(up):
                take_lower = abs(lo) <= abs(up)
                self.x[j] = lo if take_lower else up
                self.vstat[j] = _AT_LOWER if take_lower else _AT_UPPER
            elif math.isfinite(lo):
                self.x[j] = lo
                self.vstat[j] = _AT_LOWER
            elif math.isfinite(up):
                self.x[j] = up
                self.vstat[j] = _AT_UPPER
            else:
                self.x[j] = 0.0
                self.vstat[j] = _FREE
        struct = _structural_csc(self._model)
        resid = self.rhs - struct @ self.x[:n]
        art_sign = np.ones(m)
        for i in range(m):
            slack_col = n + i
            fits = self.lower[slack_col] - FEAS_TOL <= resid[i] <= self.upper[slack_col] + FEAS_TOL
            if fits:
                self.basis[i] = slack_col
                self.x[slack_col] = resid[i]
                self.vstat[slack_col] = _BASIC
                # the unused artificial is pinned at zero
                self.x[n + m + i] = 0.0
                self.vstat[n + m + i] = _AT_LOWER
                self.lower[n + m + i] = 0.0
                self.upper[n + m + i] = 0.0
            else:
                self.basis[i] = n + m + i
                art_sign[i] = 1.0 if resid[i] >= 0 else -1.0
                self.x[n + m + i] = abs(resid[i])
                self.vstat[n + m + i] = _BASIC
                self.x[slack_col] = 0.0
                self.vstat[slack_col] = _AT_LOWER if self.senses[i] != ">=" else _AT_UPPER
        eye = sp.identity(m, format="csc")
        art = sp.diags(art_sign, format="csc")
        self.A = sp.hstack([struct, eye, art], format="csc")
        self.AT = self.A.T.tocsr()
        self._refactor()

    # -- factorization -------------------------------------------------------

    def _refactor(self) -> None:
        b = self.A[:, self.basis]
        self.lu = splu(b.tocsc())
        self.etas = []
        # re-derive basic values from the nonbasic point to purge drift
        tmp = self.x.copy()
        tmp[self.basis] = 0.0
        resid = self.rhs - self.A @ tmp
        self.x[self.basis] = self.lu.solve(resid)

    def _ftran(self, col: np.ndarray) -> np.ndarray:
        v = self.lu.solve(col)
        for pos, d in self.etas:
            t = v[pos] / d[pos]
            if t != 0.0:
                v -= d * t
            v[pos] = t
        return v

    def _btran(self, vec: np.ndarray) -> np.ndarray:
        w = vec.astype(float).copy()
        for pos, d in reversed(self.etas):
            w[pos] = (w[pos] - d @ w + d[pos] * w[pos]) / d[pos]
        return self.lu.solve(w, trans="T")

    # -- core pivoting --------------------------------------------------------

    def _price(self, c: np.ndarray) -> tuple[int, int] | None:
        """Return (entering column, direction) or None at optimality."""
        y = self._btran(c[self.basis])
        red = c - self.AT @ y
        movable = (self.upper - self.lower) > 0
        up_ok = (self.vstat == _AT_LOWER) & movable & (red > OPT_TOL)
        dn_ok = (self.vstat == _AT_UPPER) & movable & (red < -OPT_TOL)
        free_ok = (self.vstat == _FREE) & (np.abs(red) > OPT_TOL)
        eligible = up_ok | dn_ok | free_ok
        if not eligible.any():
            return None
        if self._degenerate_streak >= BLAND_TRIGGER:
            q = int(np.flatnonzero(eligible)[0])
        else:
            score = np.where(eligible, np.abs(red), -1.0)
            q = int(np.argmax(score))
        sigma = 1 if red[q] > 0 else -1
        return q, sigma

    def _ratio_test(self, q: int, sigma: int, d: np.ndarray):
        """Smallest step before a basic variable or the entering bound blocks."""
        xb = self.x[self.basis]
        move = sigma * d
        ratios = np.full(self.m, math.inf)
        guard = PIVOT_TOL * 1e-3
        pos_mask = move > guard
        neg_mask = move < -guard
        if pos_mask.any():
            lo_b = self.lower[self.basis[pos_mask]]
            ratios[pos_mask] = np.maximum(xb[pos_mask] - lo_b, 0.0) / move[pos_mask]
        if neg_mask.any():
            up_b = self.upper[self.basis[neg_mask]]
            ratios[neg_mask] = np.maximum(up_b - xb[neg_mask], 0.0) / -move[neg_mask]
        t_best = float(ratios.min()) if self.m else math.inf
        gap = self.upper[q] - self.lower[q]
        if gap <= t_best:
            return gap, -1, False  # bound-to-bound flip
        if math.isinf(t_best):
            return math.inf, -1, False
        ties = np.flatnonzero(ratios <= t_best + 1e-12)
        if self._degenerate_streak >= BLAND_TRIGGER:
            pos = int(ties[np.argmin(self.basis[ties])])
        else:
            pos = int(ties[np.argmax(np.abs(d[ties]))])
        hit_upper = move[pos] < 0
        return max(t_best, 0.0), pos, bool(hit_upper)

    def _apply_step(self, q, sigma, d, t, pos, hit_upper) -> None:
        if t != 0.0:
            self.x[self.basis] -= sigma * t * d
            self.x[q] += sigma * t
        if pos < 0:
            # flip to the opposite bound
            self.x[q] = self.upper[q] if sigma > 0 else self.lower[q]
            self.vstat[q] = _AT_UPPER if sigma > 0 else _AT_LOWER
            return
        leaving = self.basis[pos]
        bound = self.upper[leaving] if hit_upper else self.lower[leaving]
        self.x[leaving] = bound
        self.vstat[leaving] = _AT_UPPER if hit_upper else _AT_LOWER
        self.basis[pos] = q
        self.vstat[q] = _BASIC
        self.etas.append((pos, d.copy()))

    def _column(self, q: int) -> np.ndarray:
        col = np.zeros(self.m)
        a = self.A
        start, end = a.indptr[q], a.indptr[q + 1]
        col[a.indices[start:end]] = a.data[start:end]
        return col

    def _run(self, c: np.ndarray, allow_unbounded: bool) -> str:
        while True:
            if self.iterations >= self.max_iters:
                raise IterationLimitError(f"simplex exceeded {self.max_iters} iterations")
            if len(self.etas) >= REFACTOR_EVERY:
                self._refactor()
            choice = self._price(c)
            if choice is None:
                return "optimal"
            q, sigma = choice
            d = self._ftran(self._column(q))
            t, pos, hit_upper = self._ratio_test(q, sigma, d)
            if math.isinf(t):
                if allow_unbounded:
                    return "unbounded"
                raise RuntimeError("phase-1 subproblem reported unbounded; numerical failure")
            if pos >= 0 and abs(d[pos]) < PIVOT_TOL:
                # tiny pivot: refresh the factors and retry this iteration
                if self.etas:
                    self._refactor()
                    continue
                self._degenerate_streak = BLAND_TRIGGER
            self.iterations += 1
            self._apply_step(q, sigma, d, t, pos, hit_upper)
            if t <= DEGENERATE_STEP:
                self._degenerate_streak += 1
            else:
                self._degenerate_streak = 0

    # -- phases ----------------------------------------------------------------

    def _drive_out_artificials(self) -> None:
        for pos in range(self.m):
            var = self.basis[pos]
            if var < self.art_start:
                continue
            e = np.zeros(self.m)
            e[pos] = 1.0
            w = self._btran(e)
            row = self.AT[: self.art_start] @ w
            candidates = np.flatnonzero(
                (np.abs(row) > PIVOT_TOL) & (self.vstat[: self.art_start] != _BASIC)
            )
            if candidates.size == 0:
                continue  # redundant row; artificial stays basic pinned at zero
            q = int(candidates[0])
            d = self._ftran(self._column(q))
            self.x[var] = 0.0
            self.vstat[var] = _AT_LOWER
            self.basis[pos] = q
            self.vstat[q] = _BASIC
            self.etas.append((pos, d.copy()))

    def solve(self) -> LpSolution:
        self._initial_point()
        infeas0 = float(self.x[self.art_start :].sum())
        if infeas0 > FEAS_TOL * max(1.0, float(np.abs(self.rhs).sum())):
            c1 = np.zeros(self.n_total)
            c1[self.art_start :] = -1.0
            self._run(c1, allow_unbounded=False)
            infeas = float(self.x[self.art_start :].sum())
            if infeas > 1e-7 * max(1.0, float(np.abs(self.rhs).max())):
                return LpSolution(
                    values=self.x[: self.n_struct].copy(),
                    objective=-math.inf,
                    status="infeasible",
                    is_vertex=False,
                    iterations=self.iterations,
                )
            self._drive_out_artificials()
        # freeze artificials at zero for phase 2
        self.lower[self.art_start :] = 0.0
        self.upper[self.art_start :] = 0.0
        nonbasic_art = self.vstat[self.art_start :] != _BASIC
        self.x[self.art_start :][nonbasic_art] = 0.0
        self._degenerate_streak = 0
        c2 = np.zeros(self.n_total)
        c2[: self.n_struct] = self.c_struct
        status = self._run(c2, allow_unbounded=True)
        values = self.x[: self.n_struct].copy()
        objective = float(self.c_struct @ values)
        if status == "unbounded":
            return LpSolution(
                values=values,
                objective=math.inf,
                status="unbounded",
                is_vertex=False,
                iterations=self.iterations,
            )
        return LpSolution(
            values=values,
            objective=objective,
            status="optimal",
            is_vertex=True,
            iterations=self.iterations,
        )
