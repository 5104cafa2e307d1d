"""Command-line interface.

One executable with subcommands: ``generate`` (synthetic data), ``train``
(full experiment to a JSON report), ``reduce-dsg`` (graph reduction),
``gap-family`` and ``unbounded-family`` (adversarial instances), and
``solve`` (single fit on a CSV instance).  Every flag can also be supplied
through a JSON config file via ``--config``; explicit flags win.  Environment
variables are never consulted.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .baselines import DcParams, WolfeParams, dca_fit, gradient_ascent, optimal_constant_price
from .core import Box, LinearModel, average_reward, perfect_info_upper_bound, sale_rate
from .datagen import (
    GenParams,
    generate_lp_gap_family,
    generate_synthetic,
    generate_unbounded_family,
    load_csv,
    save_csv,
)
from .evalharness import (
    DEFAULT_BOX_GRID,
    ExperimentConfig,
    report_table_csv,
    run_experiment,
)
from .formulation import build_lp, build_mip, extract_model
from .hardness import Graph, reduce_densest_subgraph
from .simplex import solve_lp
from .solver import root_node_solve, solve_mip

_METHOD_FLAG = {"cp": "cp", "lp": "lp", "mip": "mip", "mip-root": "mip_root",
                "dc": "dc", "ga": "ga"}


def _require(args, names):
    for name in names:
        if getattr(args, name.replace("-", "_")) is None:
            raise SystemExit(f"error: --{name} is required (flag or config file)")


def _apply_config_defaults(subparsers: dict, argv: list[str]) -> None:
    """Load ``--config`` defaults into every subparser; explicit flags win.

    Subparsers parse into a fresh namespace, so the defaults must live on
    them rather than on the top-level parser.
    """
    if "--config" not in argv:
        return
    at = argv.index("--config")
    if at + 1 >= len(argv):
        raise SystemExit("error: --config needs a file path")
    with open(argv[at + 1]) as fh:
        payload = json.load(fh)
    if not isinstance(payload, dict):
        raise SystemExit("error: config file must hold a JSON object")
    defaults = {k.replace("-", "_"): v for k, v in payload.items()}
    for sub in subparsers.values():
        sub.set_defaults(**defaults)


def cmd_generate(args) -> int:
    _require(args, ["out"])
    params = GenParams(d=args.d, n=args.n, sigma=args.sigma, rho=args.rho,
                       alpha=args.alpha, seed=args.seed)
    data = generate_synthetic(params)
    save_csv(data, args.out)
    print(f"wrote {data.n_rows} impressions (d={data.d}) to {args.out}")
    return 0


def cmd_train(args) -> int:
    _require(args, ["train", "val", "test", "report"])
    methods = tuple(_METHOD_FLAG[m] for m in args.method)
    grid = tuple(float(t) for t in args.box_grid.split(",")) if isinstance(args.box_grid, str) \
        else tuple(args.box_grid)
    n_train = len(load_csv(args.train).samples)
    n_val = len(load_csv(args.val).samples)
    n_test = len(load_csv(args.test).samples)
    config = ExperimentConfig(
        methods=methods,
        n_train=n_train,
        n_val=n_val,
        n_test=n_test,
        seed=args.seed,
        csv_train=args.train,
        csv_val=args.val,
        csv_test=args.test,
        box_grid=grid,
        offset=args.offset == "on",
        time_limit=args.time_limit,
        max_nodes=args.max_nodes,
    )
    report = run_experiment(config)
    report.save(args.report)
    if args.csv_table:
        with open(args.csv_table, "w") as fh:
            fh.write(report_table_csv(report))
    for method, row in report.methods.items():
        print(f"{method}: train={row['train_reward']:.6f} test={row['test_reward']:.6f}")
    print(f"ub: train={report.ub_train:.6f} test={report.ub_test:.6f}")
    if report.gap_closed_train is not None:
        print(f"gap closed (train): {report.gap_closed_train:.4f}")
    print(f"report written to {args.report}")
    return 0


def cmd_reduce_dsg(args) -> int:
    _require(args, ["graph", "k", "out"])
    with open(args.graph) as fh:
        graph = Graph.from_edge_list(fh.read(), num_vertices=args.vertices)
    data, box = reduce_densest_subgraph(graph, args.k)
    save_csv(data, args.out)
    print(f"wrote {int(data.n)} impressions over {graph.num_vertices} coordinates to {args.out}")
    print("intended box: unit hypercube [0,1]^d with no offset")
    return 0


def cmd_gap_family(args) -> int:
    _require(args, ["t", "out"])
    data, box = generate_lp_gap_family(args.t)
    save_csv(data, args.out)
    print(f"wrote {data.n_rows} impressions to {args.out}")
    print("intended box: coordinate 1 in [-1, 1], coordinate 2 fixed to 1, no offset")
    return 0


def cmd_unbounded_family(args) -> int:
    _require(args, ["i", "out"])
    data, optimum = generate_unbounded_family(args.i)
    save_csv(data, args.out)
    print(f"wrote {data.n_rows} impressions to {args.out}")
    print(f"reference optimum (unbounded domain): beta={optimum.beta.tolist()}")
    return 0


def cmd_solve(args) -> int:
    _require(args, ["instance", "method"])
    data = load_csv(args.instance)
    method = _METHOD_FLAG[args.method]
    if method == "cp":
        price, reward = optimal_constant_price(data)
        print(f"reward: {reward!r}")
        print(f"constant price: {price!r}")
        return 0
    if args.box is None:
        raise SystemExit("error: --box is required for box-constrained methods")
    box = Box.symmetric(data.d, args.box, offset=args.offset == "on")
    if method == "lp":
        relaxation = build_lp(data, box)
        sol = solve_lp(relaxation)
        if sol.status != "optimal":
            raise SystemExit(f"error: relaxation status {sol.status}")
        model = extract_model(relaxation.solution_dict(sol.values), data, box)
        print(f"relaxation objective: {sol.objective!r}")
    elif method in ("mip", "mip_root"):
        mip = build_mip(data, box)
        if method == "mip":
            res = solve_mip(mip, time_limit=args.time_limit, max_nodes=args.max_nodes)
        else:
            res = root_node_solve(mip, time_limit=args.time_limit)
        if res.incumbent is None:
            raise SystemExit(f"error: no feasible policy found (status {res.status})")
        model = res.incumbent
        print(f"status: {res.status}  nodes: {res.nodes_explored}  bound: {res.dual_bound!r}")
    elif method == "dc":
        init = LinearModel(np.zeros(data.d))
        model = dca_fit(data, box, DcParams(gamma=args.gamma), init)
    else:  # ga
        init = LinearModel(np.zeros(data.d))
        model = gradient_ascent(data, box, init, WolfeParams())
    reward = average_reward(model, data)
    print(f"reward: {reward!r}")
    print(f"sale rate: {sale_rate(model, data)!r}")
    print(f"upper bound: {perfect_info_upper_bound(data)!r}")
    print(f"model beta: {model.beta.tolist()}")
    print(f"model beta0: {model.beta0!r}")
    return 0


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(
        prog="reserveopt",
        description="Learn linear reserve-price policies for second-price auctions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    registry: dict = {}

    p = registry["generate"] = sub.add_parser("generate", help="write a synthetic dataset to CSV")
    p.add_argument("--config", help="JSON file of flag defaults")
    p.add_argument("--d", type=int, default=10)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--rho", type=float, default=0.9)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_generate)

    p = registry["train"] = sub.add_parser("train", help="run the full experiment protocol")
    p.add_argument("--config", help="JSON file of flag defaults")
    p.add_argument("--method", action="append", choices=sorted(_METHOD_FLAG),
                   help="repeatable; defaults to all methods", default=None)
    p.add_argument("--train")
    p.add_argument("--val")
    p.add_argument("--test")
    p.add_argument("--time-limit", type=float, default=30.0)
    p.add_argument("--max-nodes", type=int, default=None)
    p.add_argument("--box-grid", default=",".join(str(t) for t in DEFAULT_BOX_GRID))
    p.add_argument("--offset", choices=("on", "off"), default="on")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report")
    p.add_argument("--csv-table", default=None)
    p.set_defaults(func=cmd_train)

    p = registry["reduce-dsg"] = sub.add_parser("reduce-dsg", help="build the subgraph-selection instance of a graph")
    p.add_argument("--config", help="JSON file of flag defaults")
    p.add_argument("--graph", help="edge-list file, one 'u v' pair per line, 0-indexed")
    p.add_argument("--vertices", type=int, default=None)
    p.add_argument("--k", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_reduce_dsg)

    p = registry["gap-family"] = sub.add_parser("gap-family", help="write the relaxation-gap family instance")
    p.add_argument("--config", help="JSON file of flag defaults")
    p.add_argument("--t", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gap_family)

    p = registry["unbounded-family"] = sub.add_parser("unbounded-family", help="write the escaping-optimum family instance")
    p.add_argument("--config", help="JSON file of flag defaults")
    p.add_argument("--i", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_unbounded_family)

    p = registry["solve"] = sub.add_parser("solve", help="single fit on a CSV instance")
    p.add_argument("--config", help="JSON file of flag defaults")
    p.add_argument("--instance")
    p.add_argument("--method", choices=sorted(_METHOD_FLAG))
    p.add_argument("--box", type=float, default=None, help="symmetric box half-width")
    p.add_argument("--offset", choices=("on", "off"), default="off")
    p.add_argument("--gamma", type=float, default=0.1, help="ramp width for dc")
    p.add_argument("--time-limit", type=float, default=30.0)
    p.add_argument("--max-nodes", type=int, default=None)
    p.set_defaults(func=cmd_solve)

    return parser, registry


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, registry = build_parser()
    _apply_config_defaults(registry, argv)
    args = parser.parse_args(argv)
    if getattr(args, "command", None) == "train" and args.method is None:
        args.method = sorted(_METHOD_FLAG)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
