"""Problem file parsing and emission.

A problem file is a UTF-8 JSON document::

    {
      "schema": "chanceopt/1",
      "name": "toy",
      "n": 1, "m": 1,
      "decision_box": [[-1.0, 1.0]],
      "distributions": [{"type": "uniform", "params": {"lo": -1.0, "hi": 1.0}}],
      "sets": [[{"exponents": [4, 0], "coeff": -1.0}, ...]],
      "options": { ... }
    }

Exponents list the decision variables first, then the random ones.
Coordinates are written in user units; scaling to the internal box is the
tool's job.  ``options`` mirrors the CLI flags and may be partial.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .alcc import SolverParams
from .errors import ProblemFormatError
from .mc import McConfig
from .measures import Beta, DistributionSpec, ExplicitMoments, Uniform
from .moments import BASES, MONOMIAL
from .poly import Polynomial, grevlex_key
from .relaxation import ChanceProblem

SCHEMA = "chanceopt/1"


@dataclass(frozen=True)
class RunOptions:
    """Pipeline settings; file values are defaults, CLI flags override."""

    order: int = 0                  # 0 means "use the minimum admissible order"
    omega_r: float = 0.01
    basis: str = MONOMIAL
    refine_mode: str = "product"
    refine_index: int | None = None  # 0-based, for refine_mode == "single"
    solver: SolverParams = field(default_factory=SolverParams)
    mc: McConfig = field(default_factory=McConfig)


def _expect(cond: bool, message: str, path: str):
    if not cond:
        raise ProblemFormatError(message, path)


def _num(value, message: str, path: str) -> float:
    _expect(isinstance(value, (int, float)) and not isinstance(value, bool),
            message, path)
    v = float(value)
    _expect(np.isfinite(v), f"{message} (must be finite)", path)
    return v


def _parse_distribution(entry, path: str):
    _expect(isinstance(entry, dict), "distribution entry must be an object", path)
    kind = entry.get("type")
    params = entry.get("params", {})
    _expect(isinstance(params, dict), "params must be an object", f"{path}.params")
    if kind == "uniform":
        lo = _num(params.get("lo"), "uniform needs numeric lo", f"{path}.params.lo")
        hi = _num(params.get("hi"), "uniform needs numeric hi", f"{path}.params.hi")
        _expect(lo < hi, f"uniform needs lo < hi, got [{lo}, {hi}]", f"{path}.params")
        return Uniform(lo, hi)
    if kind == "beta":
        a = _num(params.get("alpha"), "beta needs numeric alpha", f"{path}.params.alpha")
        b = _num(params.get("beta"), "beta needs numeric beta", f"{path}.params.beta")
        _expect(a > 0 and b > 0, "beta shape parameters must be positive", f"{path}.params")
        return Beta(a, b)
    if kind == "moments":
        vals = params.get("values")
        _expect(isinstance(vals, list) and len(vals) >= 1,
                "moments needs a nonempty values list", f"{path}.params.values")
        vals = [_num(v, "moment must be numeric", f"{path}.params.values[{i}]")
                for i, v in enumerate(vals)]
        _expect(vals[0] == 1.0, "moment list must start with total mass 1",
                f"{path}.params.values[0]")
        _expect(all(abs(v) <= 1.0 for v in vals),
                "moments of a measure on [-1,1] must lie in [-1,1]",
                f"{path}.params.values")
        return ExplicitMoments(tuple(vals))
    raise ProblemFormatError(
        f"unsupported distribution type {kind!r} (expected uniform, beta, or moments)",
        f"{path}.type",
    )


def _parse_polynomial(entry, num_vars: int, path: str) -> Polynomial:
    _expect(isinstance(entry, list) and len(entry) >= 1,
            "polynomial must be a nonempty list of term records", path)
    terms = {}
    for t, rec in enumerate(entry):
        tpath = f"{path}[{t}]"
        _expect(isinstance(rec, dict), "term must be an object", tpath)
        exps = rec.get("exponents")
        _expect(isinstance(exps, list), "term needs an exponents list", f"{tpath}.exponents")
        _expect(len(exps) == num_vars,
                f"exponent list has length {len(exps)}, expected {num_vars} "
                f"(decision variables first, then random ones)",
                f"{tpath}.exponents")
        for i, e in enumerate(exps):
            _expect(isinstance(e, int) and not isinstance(e, bool) and e >= 0,
                    f"exponent entries must be nonnegative integers, got {e!r}",
                    f"{tpath}.exponents[{i}]")
        coeff = _num(rec.get("coeff"), "term needs a numeric coeff", f"{tpath}.coeff")
        key = tuple(exps)
        terms[key] = terms.get(key, 0.0) + coeff
    return Polynomial(num_vars, terms)


def _parse_solver(entry, path: str) -> SolverParams:
    _expect(isinstance(entry, dict), "solver options must be an object", path)
    known = {"nu0", "beta", "c", "alpha0", "tol", "max_outer", "max_inner_cap", "seed"}
    unknown = set(entry) - known
    _expect(not unknown, f"unknown solver option(s) {sorted(unknown)}", path)
    kwargs = {}
    for key in ("nu0", "beta", "c", "alpha0", "tol"):
        if key in entry:
            kwargs[key] = _num(entry[key], f"{key} must be numeric", f"{path}.{key}")
    for key in ("max_outer", "max_inner_cap", "seed"):
        if key in entry:
            v = entry[key]
            _expect(isinstance(v, int) and not isinstance(v, bool),
                    f"{key} must be an integer", f"{path}.{key}")
            kwargs[key] = v
    try:
        return SolverParams(**kwargs)
    except ValueError as exc:
        raise ProblemFormatError(str(exc), path)


def _parse_mc(entry, path: str) -> McConfig:
    _expect(isinstance(entry, dict), "mc options must be an object", path)
    known = {"samples", "grid_points", "seed"}
    unknown = set(entry) - known
    _expect(not unknown, f"unknown mc option(s) {sorted(unknown)}", path)
    kwargs = {}
    for key in known:
        if key in entry:
            v = entry[key]
            _expect(isinstance(v, int) and not isinstance(v, bool),
                    f"{key} must be an integer", f"{path}.{key}")
            kwargs[key] = v
    try:
        return McConfig(**kwargs)
    except ValueError as exc:
        raise ProblemFormatError(str(exc), path)


def parse_refine_mode(text: str, path: str = "$.options.refine_mode"):
    """Split an indicator/product/single:<j> mode string (j is 0-based)."""
    if text in ("indicator", "product"):
        return text, None
    if text.startswith("single:"):
        try:
            idx = int(text.split(":", 1)[1])
        except ValueError:
            raise ProblemFormatError(
                f"bad single index in refine mode {text!r}", path)
        _expect(idx >= 0, "single index must be >= 0", path)
        return "single", idx
    raise ProblemFormatError(
        f"unknown refine mode {text!r} (expected indicator, product, or single:<j>)",
        path,
    )


def _parse_options(entry, path: str) -> RunOptions:
    _expect(isinstance(entry, dict), "options must be an object", path)
    known = {"order", "omega_r", "basis", "refine_mode", "solver", "mc"}
    unknown = set(entry) - known
    _expect(not unknown, f"unknown option(s) {sorted(unknown)}", path)
    opts = RunOptions()
    if "order" in entry:
        v = entry["order"]
        _expect(isinstance(v, int) and not isinstance(v, bool) and v >= 0,
                "order must be a nonnegative integer", f"{path}.order")
        opts = replace(opts, order=v)
    if "omega_r" in entry:
        v = _num(entry["omega_r"], "omega_r must be numeric", f"{path}.omega_r")
        _expect(v >= 0, "omega_r must be nonnegative", f"{path}.omega_r")
        opts = replace(opts, omega_r=v)
    if "basis" in entry:
        _expect(entry["basis"] in BASES, f"basis must be one of {BASES}", f"{path}.basis")
        opts = replace(opts, basis=entry["basis"])
    if "refine_mode" in entry:
        _expect(isinstance(entry["refine_mode"], str), "refine_mode must be a string",
                f"{path}.refine_mode")
        mode, idx = parse_refine_mode(entry["refine_mode"], f"{path}.refine_mode")
        opts = replace(opts, refine_mode=mode, refine_index=idx)
    if "solver" in entry:
        opts = replace(opts, solver=_parse_solver(entry["solver"], f"{path}.solver"))
    if "mc" in entry:
        opts = replace(opts, mc=_parse_mc(entry["mc"], f"{path}.mc"))
    return opts


def parse_document(doc) -> tuple[ChanceProblem, RunOptions]:
    """Validate a decoded JSON document into a problem plus options."""
    _expect(isinstance(doc, dict), "top level must be an object", "$")
    _expect(doc.get("schema") == SCHEMA,
            f"missing or unsupported schema tag (expected {SCHEMA!r})", "$.schema")
    name = doc.get("name", "problem")
    _expect(isinstance(name, str) and name, "name must be a nonempty string", "$.name")
    n, m = doc.get("n"), doc.get("m")
    _expect(isinstance(n, int) and n >= 1, "n must be a positive integer", "$.n")
    _expect(isinstance(m, int) and m >= 1, "m must be a positive integer", "$.m")

    box = doc.get("decision_box")
    _expect(isinstance(box, list) and len(box) == n,
            f"decision_box must list {n} intervals", "$.decision_box")
    parsed_box = []
    for i, pair in enumerate(box):
        p = f"$.decision_box[{i}]"
        _expect(isinstance(pair, list) and len(pair) == 2, "interval must be [lo, hi]", p)
        lo = _num(pair[0], "lo must be numeric", p)
        hi = _num(pair[1], "hi must be numeric", p)
        _expect(lo < hi, f"need lo < hi, got [{lo}, {hi}]", p)
        parsed_box.append((lo, hi))

    dists = doc.get("distributions")
    _expect(isinstance(dists, list) and len(dists) == m,
            f"distributions must list {m} entries", "$.distributions")
    coords = tuple(
        _parse_distribution(d, f"$.distributions[{i}]") for i, d in enumerate(dists)
    )

    sets = doc.get("sets")
    _expect(isinstance(sets, list) and len(sets) >= 1,
            "sets must be a nonempty list", "$.sets")
    parsed_sets = []
    for k, s in enumerate(sets):
        _expect(isinstance(s, list) and len(s) >= 1,
                "each set needs at least one polynomial", f"$.sets[{k}]")
        parsed_sets.append(tuple(
            _parse_polynomial(pjson, n + m, f"$.sets[{k}][{j}]")
            for j, pjson in enumerate(s)
        ))

    options = _parse_options(doc.get("options", {}), "$.options")
    problem = ChanceProblem(
        name=name, n=n, m=m, sets=tuple(parsed_sets),
        dist=DistributionSpec(coords), decision_box=tuple(parsed_box),
    )
    return problem, options


def parse(path) -> tuple[ChanceProblem, RunOptions]:
    """Read and validate a problem file."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(f"not valid JSON: {exc}", "$")
    return parse_document(doc)


def _emit_distribution(dist) -> dict:
    if isinstance(dist, Uniform):
        return {"type": "uniform", "params": {"lo": dist.lo, "hi": dist.hi}}
    if isinstance(dist, Beta):
        return {"type": "beta", "params": {"alpha": dist.alpha, "beta": dist.beta}}
    return {"type": "moments", "params": {"values": list(dist.values)}}


def _emit_options(options: RunOptions) -> dict:
    mode = options.refine_mode
    if mode == "single":
        mode = f"single:{options.refine_index}"
    return {
        "order": options.order,
        "omega_r": options.omega_r,
        "basis": options.basis,
        "refine_mode": mode,
        "solver": {
            "nu0": options.solver.nu0,
            "beta": options.solver.beta,
            "c": options.solver.c,
            "alpha0": options.solver.alpha0,
            "tol": options.solver.tol,
            "max_outer": options.solver.max_outer,
            "max_inner_cap": options.solver.max_inner_cap,
            "seed": options.solver.seed,
        },
        "mc": {
            "samples": options.mc.samples,
            "grid_points": options.mc.grid_points,
            "seed": options.mc.seed,
        },
    }


def _emit_polynomial(p: Polynomial) -> list:
    return [
        {"exponents": list(alpha), "coeff": coef}
        for alpha, coef in sorted(p.terms.items(), key=lambda kv: grevlex_key(kv[0]))
    ]


def emit_document(problem: ChanceProblem, options: RunOptions | None = None) -> dict:
    """Serialize a problem (and options) into the file format."""
    doc = {
        "schema": SCHEMA,
        "name": problem.name,
        "n": problem.n,
        "m": problem.m,
        "decision_box": [[lo, hi] for lo, hi in problem.decision_box],
        "distributions": [_emit_distribution(d) for d in problem.dist.coords],
        "sets": [[_emit_polynomial(p) for p in s] for s in problem.sets],
    }
    if options is not None:
        doc["options"] = _emit_options(options)
    return doc


def write_problem(problem: ChanceProblem, path, options: RunOptions | None = None):
    doc = emit_document(problem, options)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n",
                          encoding="utf-8")
    return path
