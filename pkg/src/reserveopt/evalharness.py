"""Experiment orchestration: split protocol, symmetric-box tuning, metric
computation, and report serialization.

A run generates (or loads) data, splits it deterministically by seed, fits
each requested method with its box half-width tuned on the validation split,
and records train/test rewards, sale rates, the perfect-information bound,
and the gap-closed metric into a JSON-stable report.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .baselines import DcParams, WolfeParams, dca_fit, gradient_ascent, optimal_constant_price
from .core import Box, Dataset, LinearModel, average_reward, perfect_info_upper_bound, sale_rate
from .datagen import GenParams, generate_synthetic, load_csv
from .formulation import build_lp, build_mip, extract_model
from .simplex import solve_lp
from .solver import root_node_solve, solve_mip

__all__ = [
    "METHODS",
    "DEFAULT_BOX_GRID",
    "DEFAULT_DC_GAMMAS",
    "ExperimentConfig",
    "ExperimentReport",
    "tune_box",
    "gap_closed",
    "run_experiment",
    "report_table_csv",
]

METHODS = ("cp", "lp", "mip", "mip_root", "dc", "ga")
BOX_METHODS = ("lp", "mip", "mip_root", "dc", "ga")
DEFAULT_BOX_GRID = tuple(2.0**p for p in range(-1, 10))
DEFAULT_DC_GAMMAS = (0.01, 0.05, 0.1, 0.5, 1.0)


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: data source, splits, methods, and fitting budgets.

    Exactly one data source must be set: ``gen`` (whose ``n`` must equal the
    three split sizes combined) or the three CSV paths.
    """

    methods: tuple[str, ...]
    n_train: int
    n_val: int
    n_test: int
    seed: int = 0
    gen: GenParams | None = None
    csv_train: str | None = None
    csv_val: str | None = None
    csv_test: str | None = None
    box_grid: tuple[float, ...] = DEFAULT_BOX_GRID
    dc_gammas: tuple[float, ...] = DEFAULT_DC_GAMMAS
    offset: bool = True
    time_limit: float = 30.0
    gap_tol: float = 1e-6
    max_nodes: int | None = None

    def __post_init__(self):
        methods = tuple(self.methods)
        for m in methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}; choose from {METHODS}")
        object.__setattr__(self, "methods", methods)
        object.__setattr__(self, "box_grid", tuple(float(t) for t in self.box_grid))
        object.__setattr__(self, "dc_gammas", tuple(float(g) for g in self.dc_gammas))
        if min(self.n_train, self.n_val, self.n_test) < 1:
            raise ValueError("split sizes must be positive")
        csv_mode = any(p is not None for p in (self.csv_train, self.csv_val, self.csv_test))
        if csv_mode:
            if self.gen is not None:
                raise ValueError("give either gen params or CSV paths, not both")
            if not all((self.csv_train, self.csv_val, self.csv_test)):
                raise ValueError("CSV mode needs train, val, and test paths")
        elif self.gen is None:
            raise ValueError("config needs a data source (gen params or CSV paths)")
        else:
            total = self.n_train + self.n_val + self.n_test
            if self.gen.n != total:
                raise ValueError(f"generator n={self.gen.n} must equal train+val+test={total}")
        if any(m in BOX_METHODS for m in methods) and not self.box_grid:
            raise ValueError("box-constrained methods need a non-empty box grid")
        if self.time_limit <= 0:
            raise ValueError("time_limit must be positive")

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["gen"] = dataclasses.asdict(self.gen) if self.gen else None
        out["methods"] = list(self.methods)
        out["box_grid"] = list(self.box_grid)
        out["dc_gammas"] = list(self.dc_gammas)
        return out


@dataclass
class ExperimentReport:
    """Per-method metrics plus run provenance.

    ``created_at`` and ``timing`` are kept out of the deterministic payload:
    two runs with the same config and seed produce identical ``stable_dict``
    contents whenever no fit was truncated by a wall-clock limit (use
    ``max_nodes`` for a budget that is deterministic across runs).
    """

    config: dict
    ub_train: float
    ub_test: float
    methods: dict
    gap_closed_train: float | None
    gap_closed_test: float | None
    gap_flag: str | None
    created_at: str = ""
    timing: dict | None = None

    def stable_dict(self) -> dict:
        return {
            "config": self.config,
            "ub_train": self.ub_train,
            "ub_test": self.ub_test,
            "methods": self.methods,
            "gap_closed_train": self.gap_closed_train,
            "gap_closed_test": self.gap_closed_test,
            "gap_flag": self.gap_flag,
        }

    def to_json(self) -> str:
        payload = dict(self.stable_dict())
        payload["created_at"] = self.created_at
        payload["timing"] = self.timing
        return json.dumps(payload, sort_keys=True, indent=2)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json() + "\n")


def gap_closed(mip_reward: float, dc_reward: float, ub: float) -> float:
    """Fraction of the headroom above the surrogate baseline that the exact
    method captures: ``(mip - dc) / (ub - dc)``."""
    denom = ub - dc_reward
    if denom <= 0:
        raise ValueError(f"degenerate gap denominator {denom}; need ub > dc reward")
    return (mip_reward - dc_reward) / denom


def _initial_model(train: Dataset, box: Box) -> LinearModel:
    """Zero coefficients with the constant-price offset (clipped to the box)."""
    price, _ = optimal_constant_price(train)
    beta0 = min(max(price, box.offset_lower), box.offset_upper) if box.has_offset else 0.0
    return LinearModel(np.zeros(train.d), beta0)


def _fit_candidates(
    method: str,
    train: Dataset,
    box: Box,
    time_limit: float = 30.0,
    gap_tol: float = 1e-6,
    max_nodes: int | None = None,
    dc_gammas=DEFAULT_DC_GAMMAS,
) -> list[tuple[LinearModel, dict]]:
    """Fit one box-constrained method on the training split.

    Most methods yield a single fitted policy; the surrogate method yields
    one candidate per ramp width, leaving the choice to the validation stage
    alongside the box width.
    """
    t0 = time.monotonic()
    info: dict = {}
    if method == "lp":
        relaxation = build_lp(train, box)
        sol = solve_lp(relaxation)
        if sol.status != "optimal":
            raise RuntimeError(f"LP relaxation ended with status {sol.status}")
        model = extract_model(relaxation.solution_dict(sol.values), train, box)
        info["solver"] = {
            "status": sol.status,
            "objective": sol.objective,
            "iterations": sol.iterations,
        }
    elif method in ("mip", "mip_root"):
        mip = build_mip(train, box)
        if method == "mip":
            res = solve_mip(mip, time_limit=time_limit, gap_tol=gap_tol, max_nodes=max_nodes)
        else:
            res = root_node_solve(mip, gap_tol=gap_tol, time_limit=time_limit)
        if res.incumbent is None:
            raise RuntimeError(f"{method} found no feasible policy (status {res.status})")
        model = res.incumbent
        info["solver"] = {
            "status": res.status,
            "nodes": res.nodes_explored,
            "dual_bound": res.dual_bound,
            "root_objective": res.root_objective,
        }
    elif method == "dc":
        init = _initial_model(train, box)
        out = []
        for gamma in dc_gammas:
            fitted = dca_fit(train, box, DcParams(gamma=gamma), init)
            out.append((fitted, {"gamma": gamma, "wall_seconds": time.monotonic() - t0}))
        return out
    elif method == "ga":
        model = gradient_ascent(train, box, _initial_model(train, box), WolfeParams())
    else:
        raise ValueError(f"method {method!r} is not box-constrained")
    info["wall_seconds"] = time.monotonic() - t0
    return [(model, info)]


def _tune_box(
    data_train: Dataset,
    data_val: Dataset,
    method: str,
    grid,
    offset: bool,
    **budget,
) -> tuple[float, LinearModel, dict]:
    """Scan the width grid (and any per-method inner grid) by validation
    reward; ties go to the smaller width, then the earlier candidate."""
    if method == "cp":
        raise ValueError("the constant-price method takes no box; nothing to tune")
    if method not in BOX_METHODS:
        raise ValueError(f"unknown box-constrained method {method!r}")
    grid = sorted(float(t) for t in grid)
    if not grid:
        raise ValueError("box grid must be non-empty")
    best = None
    for t in grid:
        box = Box.symmetric(data_train.d, t, offset=offset)
        for model, info in _fit_candidates(method, data_train, box, **budget):
            val = average_reward(model, data_val)
            if best is None or val > best[0]:
                best = (val, t, model, info)
    _, t_best, model, info = best
    return t_best, model, info


def tune_box(
    data_train: Dataset,
    data_val: Dataset,
    method: str,
    grid,
    offset: bool = True,
    **budget,
) -> tuple[float, LinearModel]:
    """Pick the symmetric box half-width by validation reward.

    Fits the method on the training split at each half-width, evaluates on
    validation, and keeps the best model (ties go to the smaller width since
    the grid is scanned in increasing order with a strict improvement rule).
    """
    t_best, model, _ = _tune_box(data_train, data_val, method, grid, offset, **budget)
    return t_best, model


def _split(data: Dataset, config: ExperimentConfig) -> tuple[Dataset, Dataset, Dataset]:
    total = config.n_train + config.n_val + config.n_test
    if data.n_rows != total:
        raise ValueError(f"dataset has {data.n_rows} rows, expected {total}")
    rng = np.random.Generator(np.random.Philox(config.seed))
    perm = rng.permutation(data.n_rows)
    a = config.n_train
    b = a + config.n_val
    return data.subset(perm[:a]), data.subset(perm[a:b]), data.subset(perm[b:])


def _load_splits(config: ExperimentConfig) -> tuple[Dataset, Dataset, Dataset]:
    if config.gen is not None:
        return _split(generate_synthetic(config.gen), config)
    splits = (
        load_csv(config.csv_train),
        load_csv(config.csv_val),
        load_csv(config.csv_test),
    )
    for name, part, expected in zip(
        ("train", "val", "test"), splits, (config.n_train, config.n_val, config.n_test)
    ):
        if part.n_rows != expected:
            raise ValueError(f"{name} CSV has {part.n_rows} rows, config says {expected}")
    return splits


def _model_payload(model: LinearModel) -> dict:
    return {"beta": [float(b) for b in model.beta], "beta0": float(model.beta0)}


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Fit every requested method and assemble the report."""
    train, val, test = _load_splits(config)
    ub_train = perfect_info_upper_bound(train)
    ub_test = perfect_info_upper_bound(test)
    budget = {
        "time_limit": config.time_limit,
        "gap_tol": config.gap_tol,
        "max_nodes": config.max_nodes,
        "dc_gammas": config.dc_gammas,
    }
    rows: dict = {}
    timing: dict = {}
    for method in config.methods:
        if method == "cp":
            price, train_reward = optimal_constant_price(train)
            model = LinearModel(np.zeros(train.d), price)
            entry: dict = {"price": price}
        else:
            try:
                t_best, model, info = _tune_box(
                    train, val, method, config.box_grid, config.offset, **budget
                )
            except Exception as exc:
                raise RuntimeError(f"method {method!r} failed: {exc}") from exc
            entry = {"box_half_width": t_best}
            if "gamma" in info:
                entry["gamma"] = info["gamma"]
                entry["hyperparameter_note"] = "gamma grid is implementation-chosen"
            if "solver" in info:
                entry["solver"] = info["solver"]
            timing[method] = info.get("wall_seconds")
            train_reward = average_reward(model, train)
        test_reward = average_reward(model, test)
        for split_name, value, bound in (
            ("train", train_reward, ub_train),
            ("test", test_reward, ub_test),
        ):
            if value > bound + 1e-9:
                raise RuntimeError(
                    f"method {method!r} reports {split_name} reward {value} above bound {bound}"
                )
        entry.update(
            {
                "train_reward": train_reward,
                "test_reward": test_reward,
                "sale_rate_train": sale_rate(model, train),
                "sale_rate_test": sale_rate(model, test),
                "model": _model_payload(model),
            }
        )
        rows[method] = entry
    gc_train = gc_test = None
    gap_flag = None
    if "mip" in rows and "dc" in rows:
        try:
            gc_train = gap_closed(rows["mip"]["train_reward"], rows["dc"]["train_reward"], ub_train)
            gc_test = gap_closed(rows["mip"]["test_reward"], rows["dc"]["test_reward"], ub_test)
        except ValueError as exc:
            gap_flag = str(exc)
    return ExperimentReport(
        config=config.to_dict(),
        ub_train=ub_train,
        ub_test=ub_test,
        methods=rows,
        gap_closed_train=gc_train,
        gap_closed_test=gc_test,
        gap_flag=gap_flag,
        created_at=datetime.now(timezone.utc).isoformat(),
        timing=timing,
    )


def report_table_csv(report: ExperimentReport) -> str:
    """Flat method-by-metric table for spreadsheet import."""
    lines = ["method,train_reward,test_reward,sale_rate_train,sale_rate_test,box_half_width"]
    for method, row in report.methods.items():
        t = row.get("box_half_width", "")
        lines.append(
            f"{method},{row['train_reward']!r},{row['test_reward']!r},"
            f"{row['sale_rate_train']!r},{row['sale_rate_test']!r},{t!r}"
        )
    lines.append(f"ub,{report.ub_train!r},{report.ub_test!r},,,")
    return "\n".join(lines) + "\n"
