"""Command-line interface: ``lazywalk <command> [options]``.

JSON goes to stdout for solve/optimize/saddle/game; CSV for simulate/sweep.
Every run carries a manifest (command line, resolved config, version, seed,
timestamp); ``--config FILE`` replays the config stored in an earlier output.

Exit codes: 0 success, 1 usage error, 2 analytic diagnostic.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .chain import (
    AgentClass,
    ChainError,
    Gathering,
    InfeasibleGoalError,
    LazinessPolicy,
    StateCapError,
    build_chain,
    canonical_key,
    parse_goal,
)
from .games import (
    DisperseGameSpec,
    TeamSearchSpec,
    competitive_shares,
    disperse_payoffs,
    one_step_capture_prob,
    team_search_saddle,
    verify_competitive_equilibrium,
    verify_no_symmetric_equilibrium,
)
from .graph import GraphError, parse_graph_spec
from .optimize import BracketError
from .simulate import SimConfig, simulate, sweep_p, write_csv
from .solver import NonAbsorbingError, solve

USAGE_EXIT = 1
DIAGNOSTIC_EXIT = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_EXIT, f"{self.prog}: error: {message}\n")


# Option parsing helpers --------------------------------------------------


def parse_floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def parse_range(text: str) -> list[float]:
    """``lo:hi:step`` (inclusive) or a comma list."""
    if ":" not in text:
        return parse_floats(text)
    try:
        lo, hi, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise UsageError(f"expected lo:hi:step, got {text!r}") from None
    if step <= 0:
        raise UsageError("step must be positive")
    n = int(round((hi - lo) / step))
    return [round(lo + i * step, 12) for i in range(n + 1)]


def _classes(args):
    if args.searchers:
        return (AgentClass(args.searchers, "searcher"), AgentClass(1, "hider"))
    if not args.agents:
        raise UsageError("--agents (or --searchers) is required")
    return (AgentClass(args.agents),)


def _policy(args, classes):
    if args.pk:
        base = tuple(parse_floats(args.pk))
    elif args.p is not None:
        base = (args.p,)
    else:
        raise UsageError("--p or --pk is required")
    values = [base] * len(classes)
    if args.searchers:
        if args.hider_p is None:
            raise UsageError("--hider-p is required with --searchers")
        values[-1] = (args.hider_p,)
    return LazinessPolicy(tuple(values))


def _start(args, classes, goal, m):
    start = args.start
    if not start.startswith("state:"):
        return start
    nodes = [int(x) for x in start[len("state:"):].split(",") if x.strip()]
    if isinstance(goal, Gathering):
        if len(nodes) < m:
            nodes = nodes + [nodes[0]] * (m - len(nodes))
    return nodes


def _solve_start(args, graph, classes, goal):
    m = sum(c.count for c in classes)
    start = _start(args, classes, goal, m)
    if isinstance(start, list):
        for v in start:
            if not 0 <= v < graph.n:
                raise UsageError(f"start node {v} out of range")
        return {canonical_key(classes, goal, start): 1.0}
    return start


def _manifest(args, argv) -> dict:
    config = {k: v for k, v in vars(args).items() if k not in ("func", "config")}
    return {
        "command": ["lazywalk", *argv],
        "config": config,
        "version": __version__,
        "seed": getattr(args, "seed", None),
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }


def _emit_json(payload: dict, args, argv) -> None:
    payload = {**payload, "manifest": _manifest(args, argv)}
    json.dump(payload, sys.stdout, indent=2, default=_jsonable)
    sys.stdout.write("\n")


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serialisable: {type(x).__name__}")


# Commands ----------------------------------------------------------------


def cmd_solve(args, argv):
    graph = parse_graph_spec(args.graph)
    goal = parse_goal(args.goal)
    classes = _classes(args)
    policy = _policy(args, classes)
    start = _solve_start(args, graph, classes, goal)
    chain = build_chain(graph, classes, policy, goal, start)
    report = solve(chain)
    _emit_json({"report": report.to_dict()}, args, argv)


def cmd_optimize(args, argv):
    from .estimator import LazinessOptimizer

    if args.searchers:
        raise UsageError("optimize takes --agents; use saddle for the search game")
    graph = parse_graph_spec(args.graph)
    goal = parse_goal(args.goal)
    classes = _classes(args)
    start = _start(args, classes, goal, args.agents)
    opt = LazinessOptimizer(
        graph, args.agents, goal, start, args.population, args.tol, args.grid_step
    ).fit()
    params = ["p1", "p2"] if args.population else ["p"]
    _emit_json({"result": opt.result_.to_dict(), "parameters": params}, args, argv)


def cmd_saddle(args, argv):
    graph = parse_graph_spec(args.graph)
    spec = TeamSearchSpec(graph, args.searchers, "random", args.objective)
    res = team_search_saddle(spec)
    _emit_json({"result": res.to_dict()}, args, argv)


def cmd_game(args, argv):
    kind = args.kind
    if kind == "competitive":
        out = competitive_shares(args.r, args.s, args.h)
        payload = {"outcome": out.to_dict()}
    elif kind == "competitive-verify":
        payload = {"report": verify_competitive_equilibrium(args.s, args.h, args.grid_step)}
    elif kind == "capture-prob":
        payload = {"W": one_step_capture_prob(args.s, args.h)}
    elif kind == "disperse":
        spec = DisperseGameSpec(args.n, args.q, args.p, args.mode)
        pays = disperse_payoffs(spec)
        payload = {"payoffs": pays.tolist(), "deviator": float(pays[0])}
    elif kind == "disperse-verify":
        payload = {"report": verify_no_symmetric_equilibrium(args.grid_step, args.n)}
    else:
        raise UsageError(f"unknown game {kind!r}")
    _emit_json(payload, args, argv)


def _sim_config(args) -> SimConfig:
    if args.seed is None:
        raise UsageError("--seed is required")
    graph = parse_graph_spec(args.graph)
    goal = parse_goal(args.goal)
    classes = _classes(args)
    m = sum(c.count for c in classes)
    start = _start(args, classes, goal, m)
    if isinstance(start, list):
        if len(start) != m:
            raise UsageError(f"start lists {len(start)} nodes for {m} agents")
        start = tuple(start)
    policy = _policy(args, classes) if (args.p is not None or args.pk) else LazinessPolicy.common(0.0, len(classes))
    return SimConfig(graph, classes, policy, goal, start, args.trials, args.max_steps, args.seed)


def _csv_out(rows, args, argv):
    manifest = _manifest(args, argv)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_csv(rows, fh)
        with open(args.out + ".manifest.json", "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2)
    else:
        write_csv(rows, sys.stdout)
        print(json.dumps({"manifest": manifest}), file=sys.stderr)
    censored = sum(r.censored for r in rows)
    if censored:
        print(f"warning: {censored} censored trials excluded from means", file=sys.stderr)


def cmd_simulate(args, argv):
    from .simulate import SweepRow

    cfg = _sim_config(args)
    res = simulate(cfg, n_jobs=args.jobs)
    p = cfg.policy.values[0][0]
    _csv_out([SweepRow(p, res.mean_time, res.std_error, res.trials, res.censored_count)], args, argv)


def cmd_sweep(args, argv):
    cfg = _sim_config(args)
    if args.p_values is None:
        raise UsageError("--p lo:hi:step is required for sweep")
    rows = sweep_p(cfg, parse_range(args.p_values), n_jobs=args.jobs)
    _csv_out(rows, args, argv)


# Parser ------------------------------------------------------------------


def _add_model_args(p, with_p=True):
    p.add_argument("--graph", default=None, help="line:N, cycle:N, grid:K, complete:N or file:PATH")
    p.add_argument("--agents", type=int, default=None, help="number of agents (one class)")
    p.add_argument("--searchers", type=int, default=None, help="searcher count; adds one hider")
    p.add_argument("--goal", default="distance:1", help="distance:D, gather, capture or own")
    p.add_argument(
        "--start", default="gathered",
        help="gathered, adjacent, corner, center, left, random or state:N1,N2,...",
    )
    if with_p:
        p.add_argument("--p", type=float, default=None, help="common laziness")
        p.add_argument("--pk", default=None, help="population-dependent laziness p1,p2,...")
        p.add_argument("--hider-p", type=float, default=None, help="hider laziness (capture goal)")
    p.add_argument("--config", default=None, help="replay the config stored in an earlier output")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lazywalk", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("solve", help="exact absorption times and probabilities (JSON)")
    _add_model_args(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("optimize", help="optimal laziness for a start (JSON)")
    _add_model_args(p, with_p=False)
    p.add_argument("--population", action="store_true", help="optimise (p1, p2) jointly")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--grid-step", type=float, default=1e-3)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("saddle", help="team search game saddle point (JSON)")
    p.add_argument("--graph", default="cycle:3")
    p.add_argument("--searchers", type=int, default=2)
    p.add_argument("--objective", choices=("paper", "conditional"), default="paper")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_saddle)

    p = sub.add_parser("game", help="competitive search and first-to-disperse games (JSON)")
    p.add_argument(
        "kind",
        choices=("competitive", "competitive-verify", "capture-prob", "disperse", "disperse-verify"),
    )
    p.add_argument("--r", type=float, default=1 / 3, help="searcher 1 laziness")
    p.add_argument("--s", type=float, default=1 / 3, help="searcher 2 laziness (or s* to verify)")
    p.add_argument("--h", type=float, default=1 / 3, help="hider laziness")
    p.add_argument("--n", type=int, default=3, help="players on L_n (disperse)")
    p.add_argument("--q", type=float, default=0.0, help="deviator laziness (disperse)")
    p.add_argument("--p", type=float, default=0.5, help="others' laziness (disperse)")
    p.add_argument("--mode", choices=("full_share", "modified"), default="full_share")
    p.add_argument("--grid-step", type=float, default=0.01)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_game)

    for name, func, help_text in (
        ("simulate", cmd_simulate, "Monte Carlo mean absorption time (CSV)"),
        ("sweep", cmd_sweep, "Monte Carlo sweep over common laziness (CSV)"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_model_args(p, with_p=False)
        if name == "simulate":
            p.add_argument("--p", type=float, default=None, help="common laziness")
            p.add_argument("--pk", default=None, help="population-dependent laziness p1,p2,...")
        else:
            p.add_argument("--p", dest="p_values", default=None, help="lo:hi:step or list")
            p.set_defaults(p=None, pk=None)
        p.add_argument("--hider-p", type=float, default=None)
        p.add_argument("--trials", type=int, default=5000)
        p.add_argument("--max-steps", type=int, default=1_000_000)
        p.add_argument("--seed", type=int, default=None, help="master seed (required)")
        p.add_argument("--jobs", type=int, default=1, help="worker threads")
        p.add_argument("--out", default=None, help="CSV path (default stdout)")
        p.set_defaults(func=func)
    return parser


def _load_config(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if "manifest" in data:
        data = data["manifest"]
    return data.get("config", data)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    if not getattr(args, "func", None):
        parser.print_help(sys.stderr)
        return USAGE_EXIT
    try:
        if args.config:
            stored = _load_config(args.config)
            if stored.pop("command", args.command) != args.command:
                raise UsageError(f"config was written by a different command than {args.command!r}")
            sub = parser._subparsers._group_actions[0].choices[args.command]
            sub.set_defaults(**stored)
            args = parser.parse_args(argv)
        if args.command != "game" and getattr(args, "graph", None) is None:
            raise UsageError("--graph is required")
        args.func(args, argv)
    except (UsageError, GraphError, ChainError) as exc:
        if isinstance(exc, (InfeasibleGoalError, StateCapError)):
            print(f"error: {exc}", file=sys.stderr)
            return DIAGNOSTIC_EXIT
        print(f"usage error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except (NonAbsorbingError, BracketError) as exc:
        print(f"diagnostic: {exc}", file=sys.stderr)
        return DIAGNOSTIC_EXIT
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    return 0


if __name__ == "__main__":
    sys.exit(main())
