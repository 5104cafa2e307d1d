"""Linear-optimization model container and the reserve-price model builders.

``OptimizationModel`` is a plain bounded-variable linear program (maximization)
with integrality markers.  ``build_mip`` produces the exact mixed-integer
model of the empirical revenue problem, ``build_lp`` its relaxation, and
``build_lifted_block`` the extended (union-of-pieces) description of a single
impression whose projection is the convex hull of the block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .core import AuctionSample, Box, Dataset, LinearModel, variable_bounds

__all__ = [
    "OptimizationModel",
    "SampleBlock",
    "ReserveMeta",
    "build_sample_block",
    "build_lifted_block",
    "build_mip",
    "build_lp",
    "extract_model",
    "to_lp_text",
]

SENSES = ("<=", "=", ">=")


@dataclass
class SampleBlock:
    """Handles of one impression's variables inside an optimization model."""

    index: int
    l: float
    u: float
    v: int
    y: int
    z1: int
    z2: int
    z3: int
    rows: tuple[int, ...] = ()

    @property
    def z(self) -> tuple[int, int, int]:
        return (self.z1, self.z2, self.z3)


@dataclass
class ReserveMeta:
    """Problem context attached to models produced by the builders."""

    data: Dataset
    box: Box
    blocks: list[SampleBlock]
    beta_vars: list[int]
    beta0_var: int | None


class OptimizationModel:
    """Bounded-variable LP with integrality flags; objective sense is maximize."""

    def __init__(self):
        self.names: list[str] = []
        self.lower: list[float] = []
        self.upper: list[float] = []
        self.integer: list[bool] = []
        self.rows: list[tuple[dict[int, float], str, float]] = []
        self.objective: dict[int, float] = {}
        self.meta: ReserveMeta | None = None
        self._index: dict[str, int] = {}
        self._block_count = 0

    # -- building -----------------------------------------------------------

    def add_variable(
        self,
        name: str,
        lower: float = -math.inf,
        upper: float = math.inf,
        integer: bool = False,
    ) -> int:
        if name in self._index:
            raise ValueError(f"duplicate variable name {name!r}")
        lower = float(lower)
        upper = float(upper)
        if math.isnan(lower) or math.isnan(upper):
            raise ValueError(f"bounds of {name!r} must not be NaN")
        if lower > upper:
            raise ValueError(f"variable {name!r} has lower bound {lower} > upper bound {upper}")
        if integer and not (math.isfinite(lower) and math.isfinite(upper)):
            raise ValueError(f"integer variable {name!r} needs finite bounds")
        idx = len(self.names)
        self.names.append(name)
        self.lower.append(lower)
        self.upper.append(upper)
        self.integer.append(bool(integer))
        self._index[name] = idx
        return idx

    def add_constraint(self, coeffs: Mapping[int, float], sense: str, rhs: float) -> int:
        if sense not in SENSES:
            raise ValueError(f"sense must be one of {SENSES}, got {sense!r}")
        rhs = float(rhs)
        if not math.isfinite(rhs):
            raise ValueError("constraint right-hand side must be finite")
        row: dict[int, float] = {}
        for var, coef in coeffs.items():
            if not 0 <= var < len(self.names):
                raise ValueError(f"constraint references undeclared variable {var}")
            coef = float(coef)
            if not math.isfinite(coef):
                raise ValueError("constraint coefficients must be finite")
            if coef != 0.0:
                row[var] = coef
        self.rows.append((row, sense, rhs))
        return len(self.rows) - 1

    def set_objective(self, var: int, coef: float) -> None:
        if not 0 <= var < len(self.names):
            raise ValueError(f"objective references undeclared variable {var}")
        self.objective[var] = self.objective.get(var, 0.0) + float(coef)

    # -- inspection ----------------------------------------------------------

    @property
    def num_variables(self) -> int:
        return len(self.names)

    @property
    def num_constraints(self) -> int:
        return len(self.rows)

    def variable_index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"model has no variable named {name!r}") from None

    def integer_indices(self) -> list[int]:
        return [j for j, flag in enumerate(self.integer) if flag]

    def bounds_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array(self.lower, dtype=float), np.array(self.upper, dtype=float)

    def objective_array(self) -> np.ndarray:
        c = np.zeros(self.num_variables)
        for var, coef in self.objective.items():
            c[var] = coef
        return c

    def dense_rows(self) -> tuple[np.ndarray, list[str], np.ndarray]:
        a = np.zeros((self.num_constraints, self.num_variables))
        senses: list[str] = []
        rhs = np.zeros(self.num_constraints)
        for i, (row, sense, b) in enumerate(self.rows):
            for var, coef in row.items():
                a[i, var] = coef
            senses.append(sense)
            rhs[i] = b
        return a, senses, rhs

    def solution_dict(self, values) -> dict[str, float]:
        values = np.asarray(values, dtype=float)
        if values.shape != (self.num_variables,):
            raise ValueError(
                f"expected {self.num_variables} variable values, got shape {values.shape}"
            )
        return {name: float(values[j]) for j, name in enumerate(self.names)}

    def _next_block_index(self) -> int:
        idx = self._block_count
        self._block_count += 1
        return idx


def build_sample_block(
    model: OptimizationModel,
    sample: AuctionSample,
    l: float,
    u: float,
    integral: bool,
    index: int | None = None,
) -> SampleBlock:
    """Append one impression's reward block to ``model``.

    Variables: the reserve value ``v`` in ``[l, u]``, the reward ``y`` in
    ``[0, b1]``, and the piece indicators ``z`` in ``[0, 1]^3`` (integer when
    ``integral``).  Rows tie ``y`` to the active piece of the closed reward
    graph; the bounds on ``v`` live on the variable rather than as rows.
    """
    if l > u:
        raise ValueError(f"bounds must satisfy l <= u, got l={l}, u={u}")
    b1, b2 = sample.b1, sample.b2
    i = model._next_block_index() if index is None else int(index)
    v = model.add_variable(f"v[{i}]", l, u)
    y = model.add_variable(f"y[{i}]", 0.0, b1)
    z1 = model.add_variable(f"z[{i},1]", 0.0, 1.0, integer=integral)
    z2 = model.add_variable(f"z[{i},2]", 0.0, 1.0, integer=integral)
    z3 = model.add_variable(f"z[{i},3]", 0.0, 1.0, integer=integral)
    rows = (
        model.add_constraint({y: 1.0, z1: -b2, z2: -b1}, "<=", 0.0),
        model.add_constraint({y: 1.0, z1: -b2, z2: -b2}, ">=", 0.0),
        model.add_constraint({y: 1.0, v: -1.0, z1: -(b2 - l), z3: b1}, "<=", 0.0),
        model.add_constraint({y: 1.0, v: -1.0, z3: u}, ">=", 0.0),
        model.add_constraint({z1: 1.0, z2: 1.0, z3: 1.0}, "=", 1.0),
    )
    return SampleBlock(i, l, u, v, y, z1, z2, z3, rows)


def build_lifted_block(
    model: OptimizationModel,
    sample: AuctionSample,
    l: float,
    u: float,
    index: int | None = None,
) -> SampleBlock:
    """Append the extended union-of-pieces block for one impression.

    Each graph piece gets its own scaled copy ``(v_k, y_k)`` gated by ``z_k``;
    projecting out the copies yields the convex hull of the closed graph, so
    this block and the relaxed :func:`build_sample_block` agree under every
    objective.
    """
    if l > u:
        raise ValueError(f"bounds must satisfy l <= u, got l={l}, u={u}")
    b1, b2 = sample.b1, sample.b2
    i = model._next_block_index() if index is None else int(index)
    v = model.add_variable(f"v[{i}]", l, u)
    y = model.add_variable(f"y[{i}]", 0.0, b1)
    z1 = model.add_variable(f"z[{i},1]", 0.0, 1.0)
    z2 = model.add_variable(f"z[{i},2]", 0.0, 1.0)
    z3 = model.add_variable(f"z[{i},3]", 0.0, 1.0)
    v1 = model.add_variable(f"vp[{i},1]", min(0.0, l), max(0.0, b2))
    v2 = model.add_variable(f"vp[{i},2]", 0.0, max(0.0, b1))
    v3 = model.add_variable(f"vp[{i},3]", 0.0, max(0.0, u))
    y1 = model.add_variable(f"yp[{i},1]", 0.0, b2)
    y2 = model.add_variable(f"yp[{i},2]", 0.0, b1)
    y3 = model.add_variable(f"yp[{i},3]", 0.0, 0.0)
    rows = (
        model.add_constraint({v: 1.0, v1: -1.0, v2: -1.0, v3: -1.0}, "=", 0.0),
        model.add_constraint({y: 1.0, y1: -1.0, y2: -1.0, y3: -1.0}, "=", 0.0),
        model.add_constraint({y1: 1.0, z1: -b2}, "=", 0.0),
        model.add_constraint({v1: 1.0, z1: -l}, ">=", 0.0),
        model.add_constraint({v1: 1.0, z1: -b2}, "<=", 0.0),
        model.add_constraint({y2: 1.0, v2: -1.0}, "=", 0.0),
        model.add_constraint({v2: 1.0, z2: -b2}, ">=", 0.0),
        model.add_constraint({v2: 1.0, z2: -b1}, "<=", 0.0),
        model.add_constraint({y3: 1.0}, "=", 0.0),
        model.add_constraint({v3: 1.0, z3: -b1}, ">=", 0.0),
        model.add_constraint({v3: 1.0, z3: -u}, "<=", 0.0),
        model.add_constraint({z1: 1.0, z2: 1.0, z3: 1.0}, "=", 1.0),
    )
    return SampleBlock(i, l, u, v, y, z1, z2, z3, rows)


def _build(data: Dataset, box: Box, integral: bool) -> OptimizationModel:
    if data.d != box.d:
        raise ValueError(f"data dimension {data.d} does not match box dimension {box.d}")
    model = OptimizationModel()
    beta = [
        model.add_variable(f"beta[{j}]", box.lower[j], box.upper[j]) for j in range(data.d)
    ]
    beta0 = None
    if box.has_offset:
        beta0 = model.add_variable("beta0", box.offset_lower, box.offset_upper)
    n = data.n
    blocks: list[SampleBlock] = []
    for i, sample in enumerate(data.samples):
        l, u = variable_bounds(sample.features, box)
        block = build_sample_block(model, sample, l, u, integral, index=i)
        link: dict[int, float] = {block.v: 1.0}
        for j, w in enumerate(sample.features):
            if w != 0.0:
                link[beta[j]] = -w
        if beta0 is not None:
            link[beta0] = -1.0
        model.add_constraint(link, "=", 0.0)
        model.set_objective(block.y, data.weights[i] / n)
        blocks.append(block)
    model.meta = ReserveMeta(data=data, box=box, blocks=blocks, beta_vars=beta, beta0_var=beta0)
    return model


def build_mip(data: Dataset, box: Box) -> OptimizationModel:
    """Exact mixed-integer model of the empirical revenue maximization."""
    return _build(data, box, integral=True)


def build_lp(data: Dataset, box: Box) -> OptimizationModel:
    """The same model with all integrality markers cleared."""
    return _build(data, box, integral=False)


def extract_model(solution: Mapping[str, float], data: Dataset, box: Box) -> LinearModel:
    """Read the linear policy out of a solved model's variable values.

    Only the ``beta[j]`` entries (and ``beta0`` when the box enables the
    offset) are trusted; callers re-score the returned policy with
    :func:`reserveopt.core.average_reward` rather than reusing objective
    values.
    """
    beta = np.empty(data.d)
    for j in range(data.d):
        name = f"beta[{j}]"
        if name not in solution:
            raise ValueError(f"solution is missing a value for {name}")
        beta[j] = solution[name]
    if box.has_offset:
        if "beta0" not in solution:
            raise ValueError("solution is missing a value for beta0")
        beta0 = float(solution["beta0"])
    else:
        beta0 = 0.0
    return LinearModel(beta, beta0)


# -- plain-text export -------------------------------------------------------

def _lp_name(name: str) -> str:
    return name.replace("[", "(").replace("]", ")")


def _lp_term(coef: float, name: str, first: bool) -> str:
    sign = "-" if coef < 0 else ("" if first else "+")
    mag = abs(coef)
    lead = f"{sign} " if (sign and not first) else sign
    return f"{lead}{mag:.17g} {name}"


def _lp_expr(coeffs: Mapping[int, float], names: list[str]) -> str:
    parts = []
    for var in sorted(coeffs):
        coef = coeffs[var]
        if coef == 0.0:
            continue
        parts.append(_lp_term(coef, _lp_name(names[var]), first=not parts))
    return " ".join(parts) if parts else "0 " + _lp_name(names[0])


def to_lp_text(model: OptimizationModel) -> str:
    """Render the model in an LP-style text format.

    Layout: a ``Maximize`` section with the objective, ``Subject To`` with one
    named row per constraint (``c0``, ``c1``, ...), a ``Bounds`` section
    listing every variable, and a ``Binaries``/``Generals`` section for the
    integer variables.  Square brackets in variable names are rendered as
    parentheses.  Numbers use shortest-repr 17 significant digit formatting.
    """
    out = ["Maximize", f" obj: {_lp_expr(model.objective, model.names)}", "Subject To"]
    sense_txt = {"<=": "<=", "=": "=", ">=": ">="}
    for i, (row, sense, rhs) in enumerate(model.rows):
        out.append(f" c{i}: {_lp_expr(row, model.names)} {sense_txt[sense]} {rhs:.17g}")
    out.append("Bounds")
    for j, name in enumerate(model.names):
        lo, up = model.lower[j], model.upper[j]
        pname = _lp_name(name)
        if lo == up:
            out.append(f" {pname} = {lo:.17g}")
        elif math.isinf(lo) and math.isinf(up):
            out.append(f" {pname} free")
        elif math.isinf(lo):
            out.append(f" {pname} <= {up:.17g}")
        elif math.isinf(up):
            out.append(f" {pname} >= {lo:.17g}")
        else:
            out.append(f" {lo:.17g} <= {pname} <= {up:.17g}")
    binaries = [j for j in model.integer_indices() if model.lower[j] == 0 and model.upper[j] == 1]
    generals = [j for j in model.integer_indices() if j not in set(binaries)]
    if binaries:
        out.append("Binaries")
        out.append(" " + " ".join(_lp_name(model.names[j]) for j in binaries))
    if generals:
        out.append("Generals")
        out.append(" " + " ".join(_lp_name(model.names[j]) for j in generals))
    out.append("End")
    return "\n".join(out) + "\n"
