"""Command-line frontend.

Exit codes: 0 success, 1 input error (arguments, files, parsing), 2 numeric
failure (solver non-convergence).  Reports embed the full configuration and
tool version so runs are auditable, and never depend on locale ('.' decimal
formatting throughout).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__, charfn, game, relaxation, rounding
from .instance import (InstanceFormatError, generate_euclidean, read_instance,
                       validate, write_instance)
from .jms import jms_solve
from .linprog import LpError, NoConvergenceError


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags by default; the documented contract is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(1)


def _build_parser():
    parser = _Parser(prog="uflkit",
                     description="Facility-location LP rounding and frontier "
                                 "analysis toolkit")
    parser.add_argument("--version", action="version",
                        version=f"uflkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_instance_args(p):
        p.add_argument("--instance", required=True, help="instance file")
        p.add_argument("--format", choices=("native", "orlib"),
                       default="native", help="instance file format")

    p = sub.add_parser("solve", parents=[], help="solve the LP relaxation")
    add_instance_args(p)
    p.add_argument("--out", required=True, help="solution JSON path")

    p = sub.add_parser("round", help="filter, cluster, and Monte Carlo round")
    add_instance_args(p)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write one rounded solution (JSON) here")

    p = sub.add_parser("analyze", help="approachability frontier analysis")
    p.add_argument("--grid-gamma", type=int, default=200)
    p.add_argument("--grid-p", type=int, default=200)
    p.add_argument("--grid-phi", type=int, default=200)
    p.add_argument("--gamma-max", type=float, default=3.0)
    p.add_argument("--no-jms", action="store_true",
                   help="drop the greedy baseline row")
    p.add_argument("--check-beta", type=float, default=None,
                   help="test approachability of this corner instead of "
                        "reporting only the frontier")
    p.add_argument("--jobs", type=int, default=1,
                   help="concurrent per-phi solves")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("best-gamma", help="per-instance best scaling parameter")
    add_instance_args(p)
    p.add_argument("--grid-gamma", type=int, default=200)
    p.add_argument("--gamma-max", type=float, default=3.0)

    p = sub.add_parser("gen", help="generate a random Euclidean instance")
    p.add_argument("--facilities", type=int, required=True)
    p.add_argument("--clients", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--cost-min", type=float, default=0.5)
    p.add_argument("--cost-max", type=float, default=2.0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("jms", help="run the greedy baseline")
    add_instance_args(p)
    p.add_argument("--out", help="write the solution (JSON) here")

    p = sub.add_parser("hardness", help="bifactor hardness curve value")
    p.add_argument("--gamma-f", type=float, required=True)
    return parser


def _load_instance(args):
    if not os.path.exists(args.instance):
        raise InstanceFormatError(f"instance file not found: {args.instance}")
    return read_instance(args.instance, format=args.format)


def _cmd_solve(args):
    inst = _load_instance(args)
    frac = relaxation.solve_relaxation(inst)
    relaxation.write_solution(frac, args.out)
    print(f"objective: {frac.objective!r}")
    print(f"facility_cost: {frac.facility_cost!r}")
    print(f"connection_cost: {frac.connection_cost!r}")
    print(f"written: {args.out}")
    return 0


def _cmd_round(args):
    inst = _load_instance(args)
    frac = relaxation.solve_relaxation(inst)
    fs = rounding.filter_solution(frac, args.gamma)
    cs = rounding.cluster(fs)
    est = rounding.estimate_cost(fs, cs, args.trials, args.seed)
    h = charfn.characteristic_of_instance(frac)
    bound = charfn.connection_bound(args.gamma, h)
    lines = [
        f"uflkit-round v{__version__}",
        f"instance: {args.instance}",
        f"gamma: {args.gamma!r} trials: {args.trials} seed: {args.seed}",
        f"lp_objective: {frac.objective!r}",
        f"facility_mean: {est.facility_mean!r} stderr: {est.facility_stderr!r} "
        f"target_scaled_lp: {(args.gamma * frac.facility_cost)!r}",
        f"merged_facility_mean: {est.merged_facility_mean!r}",
        f"connection_mean: {est.connection_mean!r} stderr: "
        f"{est.connection_stderr!r} bound: {bound!r}",
        f"total_mean: {(est.merged_facility_mean + est.connection_mean)!r}",
        f"centers: {cs.centers.size} splits: {fs.split_count}",
    ]
    print("\n".join(lines))
    if args.out:
        rounding.write_solution(rounding.round_once(fs, cs, args.seed), args.out)
    return 0


def _grid_from_args(args):
    return game.GameGrid.uniform(k_gamma=args.grid_gamma, k_p=args.grid_p,
                                 k_phi=args.grid_phi, gamma_max=args.gamma_max,
                                 include_jms=not args.no_jms)


def _cmd_analyze(args):
    grid = _grid_from_args(args)
    os.makedirs(args.out, exist_ok=True)
    started = time.time()
    matrices = game.build_matrices(grid)
    result = game.frontier(grid, jobs=args.jobs, matrices=matrices)
    runtime = time.time() - started

    with open(os.path.join(args.out, "frontier.csv"), "w", encoding="utf-8") as fh:
        fh.write("phi,value\n")
        for phi, val in zip(result.phi_grid, result.values):
            fh.write(f"{phi!r},{val!r}\n")
    profile = game.witness_profile(result)
    with open(os.path.join(args.out, "witness.csv"), "w", encoding="utf-8") as fh:
        fh.write("q,weight\n")
        for q, w in sorted(profile.terms):
            fh.write(f"{q!r},{w!r}\n")

    summary = {
        "version": __version__,
        "grid": grid.describe(),
        "jobs": args.jobs,
        "beta_star": result.beta_star,
        "phi_star": result.phi_star,
        "witness_mass_at_min_q": profile.mass_at_min_q,
        "witness_max_other_weight": profile.max_other_weight,
        "runtime_seconds": runtime,
    }
    if args.check_beta is not None:
        chk = game.check_beta(args.check_beta, grid, jobs=args.jobs,
                              matrices=matrices)
        summary["check_beta"] = {
            "beta": chk.beta,
            "approachable": chk.approachable,
            "margin": chk.margin,
            "blocking_phi": chk.blocking_phi,
        }
        print(f"check_beta {args.check_beta!r}: "
              f"{'approachable' if chk.approachable else 'blocked'}"
              + ("" if chk.approachable else f" at phi={chk.blocking_phi!r}"))
    with open(os.path.join(args.out, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=1)
        fh.write("\n")
    print(f"beta_star: {result.beta_star!r}")
    print(f"phi_star: {result.phi_star!r}")
    print(f"outputs: {args.out}")
    return 0


def _cmd_best_gamma(args):
    inst = _load_instance(args)
    frac = relaxation.solve_relaxation(inst)
    grid = game.GameGrid.uniform(k_gamma=args.grid_gamma, k_p=2, k_phi=2,
                                 gamma_max=args.gamma_max)
    h = charfn.characteristic_of_instance(frac)
    try:
        h_unit = charfn.normalize(h)
    except charfn.DegenerateFunctionError:
        h_unit = None
        print("degenerate profile: all connection costs are zero")
    best = game.best_response(h_unit, grid)
    print(f"gamma_star: {best.gamma!r}")
    print(f"theta_star: {best.theta!r}")
    print(f"ratio: {best.ratio!r}")

    crossover = game.best_response(
        h_unit, game.GameGrid(gamma_grid=np.array([game.CROSSOVER_GAMMA]),
                              p_grid=grid.p_grid, phi_grid=grid.phi_grid))
    print(f"ratio_at_crossover_gamma: {crossover.ratio!r}")
    print(f"ratio_jms_only: {max(1.11, 1.78)!r}")
    return 0


def _cmd_gen(args):
    inst = generate_euclidean(args.facilities, args.clients, args.seed,
                              cost_range=(args.cost_min, args.cost_max))
    report = validate(inst)
    if not report.is_valid:
        raise RuntimeError("generated instance failed validation")
    write_instance(inst, args.out)
    print(f"written: {args.out} ({args.facilities} facilities, "
          f"{args.clients} clients, seed {args.seed})")
    return 0


def _cmd_jms(args):
    inst = _load_instance(args)
    sol = jms_solve(inst)
    print(f"open: {[int(i) for i in sol.open_facilities]}")
    print(f"facility_cost: {sol.facility_cost!r}")
    print(f"connection_cost: {sol.connection_cost!r}")
    print(f"total: {sol.total_cost!r}")
    if args.out:
        rounding.write_solution(sol, args.out)
    return 0


def _cmd_hardness(args):
    print(f"{game.hardness_curve(args.gamma_f)!r}")
    return 0


_COMMANDS = {
    "solve": _cmd_solve,
    "round": _cmd_round,
    "analyze": _cmd_analyze,
    "best-gamma": _cmd_best_gamma,
    "gen": _cmd_gen,
    "jms": _cmd_jms,
    "hardness": _cmd_hardness,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (InstanceFormatError, FileNotFoundError, ValueError) as exc:
        sys.stderr.write(f"uflkit: input error: {exc}\n")
        return 1
    except (NoConvergenceError, LpError, RuntimeError) as exc:
        sys.stderr.write(f"uflkit: numeric failure: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
