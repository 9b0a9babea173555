"""Command-line entry point: ``run``, ``grid``, ``params`` and ``check`` subcommands.

Exit codes: 0 on success, 2 on configuration errors, 3 on oracle failures.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .envelope import check_second_order, make_envelope
from .errors import ConfigError, MoreauEscapeError, OracleFailure
from .harness import ExperimentConfig, grid_certify, load_config, run_experiment
from .pgd import ab_admissible, compute_params, verify_schedule_inequalities
from .problems import PROBLEMS, Box, get_problem

EXIT_OK, EXIT_CONFIG, EXIT_ORACLE = 0, 2, 3


def _add_run(sub):
    p = sub.add_parser("run", help="run perturbed inexact gradient descent experiments")
    p.add_argument("--config", help="JSON file with ExperimentConfig fields")
    p.add_argument("--problem", choices=sorted(PROBLEMS))
    p.add_argument("--model", choices=["subgradient", "prox-gradient", "prox-linear"])
    p.add_argument("--mu", type=float)
    p.add_argument("--oracle-mode", dest="oracle_mode", choices=["one-sided", "two-sided", "exact"])
    p.add_argument("--K", type=int)
    p.add_argument("--theta", type=float)
    p.add_argument("--oracle-a", dest="oracle_a", type=float)
    p.add_argument("--oracle-b", dest="oracle_b", type=float)
    p.add_argument("--mode", choices=["theory", "practical"])
    p.add_argument("--eta", type=float)
    p.add_argument("--r", type=float)
    p.add_argument("--M", type=float)
    p.add_argument("--T", type=int)
    p.add_argument("--eps1", type=float)
    p.add_argument("--eps2", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--seed", type=int, action="append", dest="seeds",
                   help="seed (repeatable); overrides the config list")
    p.add_argument("--init", type=float, nargs="+", action="append", dest="inits",
                   help="initial point (repeatable)")
    p.add_argument("--out", dest="outputs", help="output directory")
    p.add_argument("--no-traces", dest="write_traces", action="store_false", default=None)
    p.add_argument("--record-envelope", dest="record_envelope", action="store_true", default=None)


def _cmd_run(args) -> int:
    keys = ["problem", "model", "mu", "oracle_mode", "K", "theta", "oracle_a", "oracle_b",
            "mode", "eta", "r", "M", "T", "eps1", "eps2", "delta", "seeds", "inits",
            "outputs", "write_traces", "record_envelope"]
    overrides = {k: getattr(args, k) for k in keys if getattr(args, k) is not None}
    if args.config:
        cfg = load_config(args.config, overrides)
    else:
        cfg = ExperimentConfig.from_mapping(overrides)
    result = run_experiment(cfg)
    n_cert = sum(s.certified_t is not None for s in result.runs)
    print(f"{n_cert}/{len(result.runs)} runs reached a certified point")
    print(f"summary: {result.summary_path}")
    print(f"manifest: {result.manifest_path}")
    return EXIT_OK


def _add_grid(sub):
    p = sub.add_parser("grid", help="certify second-order criticality on a uniform grid")
    p.add_argument("--problem", default="abs_quartic", choices=sorted(PROBLEMS))
    p.add_argument("--mu", type=float)
    p.add_argument("--eps1", type=float, default=0.04)
    p.add_argument("--eps2", type=float, default=0.04)
    p.add_argument("--box", type=float, nargs=2, metavar=("LO", "HI"), default=(-1.5, 1.5))
    p.add_argument("--n", type=int, default=301)
    p.add_argument("--out", default="grid.csv")


def _cmd_grid(args) -> int:
    problem = get_problem(args.problem)
    lo, hi = args.box
    if not lo < hi:
        raise ConfigError("box", "LO must be below HI")
    box = Box(np.full(problem.dim, lo), np.full(problem.dim, hi))
    report = grid_certify(args.problem, args.mu, args.eps1, args.eps2, box, args.n)
    report.write_csv(args.out)
    _, count = report.components()
    print(f"passed cells: {int(report.passed.sum())}, components: {count}, "
          f"not smooth: {int(report.not_smooth.sum())}")
    print(f"written: {args.out}")
    return EXIT_OK


def _add_params(sub):
    p = sub.add_parser("params", help="theory-mode parameters, admissible (a, b), inequality report")
    p.add_argument("--problem", choices=sorted(PROBLEMS),
                   help="take L1, L2, d from a corpus problem")
    p.add_argument("--mu", type=float)
    p.add_argument("--eps1", type=float, default=0.04)
    p.add_argument("--eps2", type=float, default=0.04)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--L1", type=float)
    p.add_argument("--L2", type=float)
    p.add_argument("--Delta", type=float, default=1.0)
    p.add_argument("--d", type=int)
    p.add_argument("--a", type=float, default=0.0)
    p.add_argument("--b", type=float, default=0.0)


def _cmd_params(args) -> int:
    L1, L2, d = args.L1, args.L2, args.d
    if args.problem:
        problem = get_problem(args.problem)
        env = make_envelope(problem, args.mu)
        L1 = env.L1 if L1 is None else L1
        L2 = problem.L2 if L2 is None else L2
        d = problem.dim if d is None else d
    for name, val in (("L1", L1), ("L2", L2), ("d", d)):
        if val is None:
            raise ConfigError(name, "required unless --problem is given")
    try:
        params = compute_params(args.eps1, args.eps2, args.delta, L1, L2, args.Delta, d,
                                args.a, args.b, check=False)
    except (MoreauEscapeError, ValueError) as exc:
        raise ConfigError("params", str(exc)) from None
    adm = ab_admissible(params)
    report = verify_schedule_inequalities(params)
    out = {"params": params.as_dict(),
           "admissible": {"a_max": adm.a_max, "b_max": adm.b_max, "ok": adm.ok},
           "inequalities": {"radius": report.radius_ok, "function_value": report.value_ok,
                            "probability": report.prob_ok, "slacks": report.slacks()}}
    print(json.dumps(out, indent=2))
    return EXIT_OK


def _add_check(sub):
    p = sub.add_parser("check", help="certify a single point")
    p.add_argument("--problem", default="abs_quartic", choices=sorted(PROBLEMS))
    p.add_argument("--point", type=float, nargs="+", required=True)
    p.add_argument("--mu", type=float)
    p.add_argument("--eps1", type=float, default=0.04)
    p.add_argument("--eps2", type=float, default=0.04)


def _cmd_check(args) -> int:
    problem = get_problem(args.problem)
    if len(args.point) != problem.dim:
        raise ConfigError("point", f"expected {problem.dim} coordinates")
    try:
        env = make_envelope(problem, args.mu)
        cert = check_second_order(env, np.array(args.point), args.eps1, args.eps2)
    except MoreauEscapeError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("point", str(exc)) from None
    rec = cert.record()
    if cert.minorant is not None:
        rec["minorant_checks"] = cert.minorant.checks()
    print(json.dumps(rec, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="moreau-escape", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run(sub)
    _add_grid(sub)
    _add_params(sub)
    _add_check(sub)
    return parser


COMMANDS = {"run": _cmd_run, "grid": _cmd_grid, "params": _cmd_params, "check": _cmd_check}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OracleFailure as exc:
        print(f"oracle failure: {exc}", file=sys.stderr)
        return EXIT_ORACLE


if __name__ == "__main__":
    sys.exit(main())
