"""Command-line interface.

Subcommands::

    chanceopt build   problem.json [flags]    # dump the conic program
    chanceopt solve   problem.json [flags]    # relaxation + decode
    chanceopt refine  problem.json [flags]    # solve, then refinement SDPs
    chanceopt verify  problem.json [flags]    # solve, then Monte Carlo (or --at)
    chanceopt sweep   problem.json --dmin A --dmax B   # order series + CSV
    chanceopt grid    problem.json [flags]    # grid-search baseline
    chanceopt bundled NAME [--out FILE]       # copy a bundled problem file

Flags override the problem file's options.  Exit codes: 0 success,
2 input error, 3 solver non-convergence, 4 resource guard.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .errors import ChanceOptError, ProblemFormatError, ResourceError
from .pipeline import baseline_grid, input_hash, run_pipeline
from .problem_io import parse, parse_refine_mode
from .problems import BUNDLED, bundled_path

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SOLVER = 3
EXIT_RESOURCE = 4


def _add_common_flags(sp):
    sp.add_argument("problem", help="problem file (JSON) or bundled name")
    sp.add_argument("--order", "-d", type=int, help="relaxation order")
    sp.add_argument("--omega-r", type=float, dest="omega_r",
                    help="trace regularization weight")
    sp.add_argument("--basis", choices=["monomial", "chebyshev"],
                    help="matrix basis for the relaxation")
    sp.add_argument("--refine-mode", dest="refine_mode",
                    help="indicator | product | single:<j> (j is a 0-based "
                         "polynomial index)")
    sp.add_argument("--nu0", type=float, help="initial penalty")
    sp.add_argument("--beta-growth", type=float, dest="beta_growth",
                    help="penalty growth factor (> 1)")
    sp.add_argument("--tol", type=float, help="outer relative-change stop")
    sp.add_argument("--max-outer", type=int, dest="max_outer")
    sp.add_argument("--max-inner-cap", type=int, dest="max_inner_cap")
    sp.add_argument("--seed", type=int, help="seed for solver and Monte Carlo")
    sp.add_argument("--samples", type=int, help="Monte Carlo samples per estimate")
    sp.add_argument("--grid", type=int, help="grid points per decision coordinate")
    sp.add_argument("--out-dir", default=".", help="directory for reports")


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="chanceopt",
        description="Maximize the probability that a random point satisfies a "
                    "union of polynomial constraint sets, via moment SDP "
                    "relaxations solved by a first-order augmented Lagrangian "
                    "method.",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    for name, doc in [
        ("build", "build the conic relaxation and export it as text"),
        ("solve", "solve the relaxation and decode the decision"),
        ("refine", "solve, then sharpen the estimate at the decoded decision"),
        ("verify", "solve, then Monte Carlo the decoded decision"),
        ("sweep", "run a range of orders and emit the estimate series"),
        ("grid", "grid-search baseline over the decision box"),
    ]:
        sp = sub.add_parser(name, help=doc)
        _add_common_flags(sp)
        if name == "sweep":
            sp.add_argument("--dmin", type=int, required=True)
            sp.add_argument("--dmax", type=int, required=True)
        if name == "verify":
            sp.add_argument("--at", help="comma-separated decision to verify, "
                                         "skipping the solve")
    sb = sub.add_parser("bundled", help="list or copy bundled problem files")
    sb.add_argument("name", nargs="?", help=f"one of: {', '.join(BUNDLED)}")
    sb.add_argument("--out", help="destination file (defaults to ./NAME.json)")
    return ap


def _locate(problem_arg: str) -> Path:
    p = Path(problem_arg)
    if p.exists():
        return p
    if problem_arg in BUNDLED:
        return Path(str(bundled_path(problem_arg)))
    raise ProblemFormatError(f"no such file or bundled problem: {problem_arg}")


def _apply_flags(options, args):
    solver = options.solver
    mc = options.mc
    if args.nu0 is not None:
        solver = replace(solver, nu0=args.nu0)
    if args.beta_growth is not None:
        solver = replace(solver, beta=args.beta_growth)
    if args.tol is not None:
        solver = replace(solver, tol=args.tol)
    if args.max_outer is not None:
        solver = replace(solver, max_outer=args.max_outer)
    if args.max_inner_cap is not None:
        solver = replace(solver, max_inner_cap=args.max_inner_cap)
    if args.seed is not None:
        solver = replace(solver, seed=args.seed)
        mc = replace(mc, seed=args.seed)
    if args.samples is not None:
        mc = replace(mc, samples=args.samples)
    if args.grid is not None:
        mc = replace(mc, grid_points=args.grid)
    options = replace(options, solver=solver, mc=mc)
    if args.order is not None:
        options = replace(options, order=args.order)
    if args.omega_r is not None:
        options = replace(options, omega_r=args.omega_r)
    if args.basis is not None:
        options = replace(options, basis=args.basis)
    if args.refine_mode is not None:
        mode, idx = parse_refine_mode(args.refine_mode, "--refine-mode")
        options = replace(options, refine_mode=mode, refine_index=idx)
    return options


def _cmd_bundled(args) -> int:
    if not args.name:
        for name in BUNDLED:
            print(name)
        return EXIT_OK
    src = bundled_path(args.name)
    dest = Path(args.out) if args.out else Path(f"{args.name}.json")
    dest.write_text(src.read_text(encoding="utf-8"), encoding="utf-8")
    print(dest)
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "bundled":
            return _cmd_bundled(args)

        path = _locate(args.problem)
        problem, options = parse(path)
        options = _apply_flags(options, args)
        out_dir = Path(args.out_dir)

        if args.command == "grid":
            result = baseline_grid(problem, options.mc)
            out = out_dir / f"{problem.name}_grid_report.json"
            out_dir.mkdir(parents=True, exist_ok=True)
            out.write_text(json.dumps(result, indent=2) + "\n", encoding="utf-8")
            print(f"x* = {result['x']}  p* = {result['p']:.4f}  ({out})")
            return EXIT_OK

        orders = None
        verify_at = None
        if args.command == "sweep":
            if args.dmin < 1 or args.dmax < args.dmin:
                raise ProblemFormatError("need 1 <= dmin <= dmax", "--dmin/--dmax")
            orders = (args.dmin, args.dmax)
        if args.command == "verify" and getattr(args, "at", None):
            try:
                verify_at = [float(v) for v in args.at.split(",")]
            except ValueError:
                raise ProblemFormatError(f"bad decision vector {args.at!r}", "--at")

        report = run_pipeline(problem, options, args.command, orders=orders,
                              verify_at=verify_at, source_hash=input_hash(path))
        json_path = report.write(out_dir)
        if report.status == "interrupted":
            print(f"interrupted; partial report: {json_path}", file=sys.stderr)
            return 130
        if args.command == "sweep":
            csv_path = report.write_series(out_dir)
            print(f"series: {csv_path}")
        if args.command == "build" and report.program is not None:
            d = report.results[0].order
            text_path = out_dir / f"{problem.name}_d{d}_program.txt"
            report.program.export_text(text_path)
            print(f"program: {text_path}")
        for res in report.results:
            bits = [f"d={res.order}"]
            if res.p_sdp is not None:
                bits.append(f"p_sdp={res.p_sdp:.4f}")
            if res.x is not None:
                bits.append("x=[" + ", ".join(f"{v:.4f}" for v in res.x) + "]")
            if res.p_refine_indicator is not None:
                bits.append(f"p_ind={res.p_refine_indicator:.4f}")
            if res.p_refine_weighted is not None:
                bits.append(f"p_wt={res.p_refine_weighted:.4f}")
            if res.p_mc is not None:
                bits.append(f"p_mc={res.p_mc:.4f}±{res.p_mc_halfwidth:.4f}")
            print("  ".join(bits))
        print(f"report: {json_path}")

        solver_trouble = any("solver_max_outer" in r.flags or "solver_stalled" in r.flags
                             for r in report.results)
        return EXIT_SOLVER if solver_trouble else EXIT_OK

    except ProblemFormatError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ResourceError as exc:
        print(f"resource guard: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except ChanceOptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
