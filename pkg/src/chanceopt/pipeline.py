"""End-to-end orchestration: scale, build, solve, decode, refine, verify.

Reports come in pairs: a JSON document with everything (including wall
times) and, for sweeps, a CSV holding the probability-estimate series
against the relaxation order.  The CSV contains no timing information,
so a rerun with the same file and seeds reproduces it byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .alcc import SolverTrace, alcc_solve
from .mc import McConfig, estimate_probability, grid_search
from .problem_io import RunOptions
from .relaxation import (
    ChanceProblem,
    ScaledProblem,
    build_chance_sdp,
    build_refinement_sdp,
    decode,
    min_relaxation_order,
    scale_problem,
)


@dataclass
class OrderResult:
    """Everything the pipeline learned at one relaxation order."""

    order: int
    p_sdp: float | None = None            # mass of the relaxation solution
    x: list | None = None                 # decoded decision, user coordinates
    p_refine_indicator: float | None = None
    p_refine_weighted: float | None = None
    p_mc: float | None = None
    p_mc_halfwidth: float | None = None
    solver: dict = field(default_factory=dict)
    wall_times: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "order": self.order,
            "p_sdp": self.p_sdp,
            "x": self.x,
            "p_refine_indicator": self.p_refine_indicator,
            "p_refine_weighted": self.p_refine_weighted,
            "p_mc": self.p_mc,
            "p_mc_halfwidth": self.p_mc_halfwidth,
            "solver": self.solver,
            "wall_times": self.wall_times,
            "flags": self.flags,
        }


def _trace_summary(trace: SolverTrace) -> dict:
    return {
        "status": trace.status,
        "outer_iterations": trace.outer_iterations,
        "inner_iterations": trace.total_inner_iterations,
        "residual": trace.final_residual,
        "objective": trace.final_objective,
        "sigma_max": trace.sigma_max,
        "cap_limited": any(r.cap_limited for r in trace.records),
    }


def input_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _fmt(value) -> str:
    if value is None:
        return ""
    return format(float(value), ".12g")


def series_csv_text(results: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["order", "p_sdp", "p_refine_indicator", "p_refine_weighted",
                "p_mc", "p_mc_halfwidth"])
    for r in results:
        w.writerow([r.order, _fmt(r.p_sdp), _fmt(r.p_refine_indicator),
                    _fmt(r.p_refine_weighted), _fmt(r.p_mc), _fmt(r.p_mc_halfwidth)])
    return buf.getvalue()


@dataclass
class RunReport:
    name: str
    command: str
    options: RunOptions
    results: list
    source_hash: str = ""
    status: str = "complete"
    program: object = field(default=None, repr=False)  # set by the build command

    def as_dict(self) -> dict:
        from .problem_io import _emit_options
        return {
            "tool": "chanceopt",
            "version": __version__,
            "name": self.name,
            "command": self.command,
            "status": self.status,
            "input_sha256": self.source_hash,
            "options": _emit_options(self.options),
            "results": [r.as_dict() for r in self.results],
        }

    def write(self, out_dir, stem: str | None = None) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        if stem is None:
            if len(self.results) == 1:
                stem = f"{self.name}_d{self.results[0].order}"
            else:
                stem = self.name
        path = out_dir / f"{stem}_report.json"
        path.write_text(json.dumps(self.as_dict(), indent=2) + "\n", encoding="utf-8")
        return path

    def write_series(self, out_dir, stem: str | None = None) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"{stem or self.name}_series.csv"
        path.write_text(series_csv_text(self.results), encoding="utf-8")
        return path


def resolve_order(problem: ChanceProblem, options: RunOptions) -> int:
    return options.order if options.order >= 1 else min_relaxation_order(problem)


def _solve_order(scaled: ScaledProblem, options: RunOptions, order: int,
                 refine: bool, verify: bool) -> OrderResult:
    res = OrderResult(order=order)
    t0 = time.perf_counter()
    program = build_chance_sdp(scaled, order, omega_r=options.omega_r,
                               basis=options.basis)
    res.wall_times["build"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    trace = alcc_solve(program, options.solver)
    res.wall_times["solve"] = time.perf_counter() - t0
    sol = decode(program, trace.x)
    res.p_sdp = sol.probability
    res.x = [float(v) for v in sol.x]
    res.solver = _trace_summary(trace)
    if trace.status != "converged":
        res.flags.append(f"solver_{trace.status}")

    if refine:
        t0 = time.perf_counter()
        ind = build_refinement_sdp(scaled, sol.x_scaled, order, mode="indicator",
                                   basis=options.basis)
        tr = alcc_solve(ind, options.solver)
        res.p_refine_indicator = decode(ind, tr.x).mass
        if options.refine_mode != "indicator":
            wt = build_refinement_sdp(
                scaled, sol.x_scaled, order, mode=options.refine_mode,
                weight_index=options.refine_index, basis=options.basis,
            )
            tr = alcc_solve(wt, options.solver)
            res.p_refine_weighted = decode(wt, tr.x).mass
        res.wall_times["refine"] = time.perf_counter() - t0

    if verify:
        t0 = time.perf_counter()
        est, half = estimate_probability(scaled.original, sol.x, options.mc)
        res.p_mc, res.p_mc_halfwidth = est, half
        res.wall_times["verify"] = time.perf_counter() - t0
    return res


def run_pipeline(problem: ChanceProblem, options: RunOptions, command: str,
                 orders: tuple[int, int] | None = None,
                 verify_at=None, source_hash: str = "") -> RunReport:
    """Execute one subcommand on a parsed problem.

    ``command`` is one of build, solve, refine, verify, sweep.  ``orders``
    carries (d_min, d_max) for sweeps; ``verify_at`` optionally pins the
    decision at which the verify subcommand estimates the probability,
    skipping the solve.
    """
    scaled = scale_problem(problem)
    report = RunReport(name=problem.name, command=command, options=options,
                       results=[], source_hash=source_hash)
    try:
        if command == "build":
            order = resolve_order(problem, options)
            res = OrderResult(order=order)
            t0 = time.perf_counter()
            program = build_chance_sdp(scaled, order, omega_r=options.omega_r,
                                       basis=options.basis)
            res.wall_times["build"] = time.perf_counter() - t0
            res.solver = {"num_scalars": program.num_scalars,
                          "blocks": [[b.label, b.dim] for b in program.blocks]}
            report.results.append(res)
            report.program = program
        elif command in ("solve", "refine", "verify"):
            order = resolve_order(problem, options)
            if command == "verify" and verify_at is not None:
                x = np.asarray(verify_at, dtype=float)
                res = OrderResult(order=order)
                t0 = time.perf_counter()
                res.x = [float(v) for v in x]
                res.p_mc, res.p_mc_halfwidth = estimate_probability(
                    problem, x, options.mc)
                res.wall_times["verify"] = time.perf_counter() - t0
                report.results.append(res)
            else:
                report.results.append(_solve_order(
                    scaled, options, order,
                    refine=(command == "refine"),
                    verify=(command == "verify"),
                ))
        elif command == "sweep":
            d_min, d_max = orders
            for order in range(d_min, d_max + 1):
                report.results.append(_solve_order(
                    scaled, options, order, refine=True, verify=True))
        else:
            raise ValueError(f"unknown command {command!r}")
    except KeyboardInterrupt:
        # hand back whatever finished so the caller can write a partial report
        report.status = "interrupted"
        return report
    if any(res.flags for res in report.results):
        report.status = "complete_with_flags"
    return report


def baseline_grid(problem: ChanceProblem, mc: McConfig) -> dict:
    """Grid-search baseline over the decision box (the oracle of last resort)."""
    t0 = time.perf_counter()
    x_star, p_star = grid_search(problem, mc)
    return {
        "x": [float(v) for v in x_star],
        "p": p_star,
        "wall_time": time.perf_counter() - t0,
    }
