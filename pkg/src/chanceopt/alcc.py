"""First-order augmented Lagrangian solver for the conic programs.

Outer iterations minimize the augmented Lagrangian

    L(x; nu, theta) = c.x / nu + d(A(x) - b - theta)^2 / 2

inexactly over the simple set, where d is the distance to the product of
PSD cones, then update the dual and grow the penalty geometrically
(nu_k = beta^k nu_0).  The inner solver is an accelerated projected
gradient loop with momentum coefficients t_{l+1} = (1 + sqrt(1+4 t_l^2))/2,
step 1/L with L = sigma_max(A)^2 (the objective is linear), and two exits:
a step-size test certifying a small subgradient, or the iteration budget
l_max = k^(1+c) beta^k B sqrt(2 nu_0 L / alpha_0) capped by a configured
bound.  The PSD cone is self-dual, so one eigendecomposition per block
serves both the primal distance and the dual projection.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .conic import ConicProgram
from .errors import NumericalError
from .moments import SymMatrix


@dataclass(frozen=True)
class SolverParams:
    """Schedule and stopping parameters.

    ``nu0`` is the initial penalty (worth tuning per problem); ``beta`` the
    geometric growth factor; ``c`` the schedule exponent offset; ``alpha0``
    the inner inexactness scale; ``tol`` the outer relative-change stop.
    """

    nu0: float = 1.0
    beta: float = 3.0
    c: float = 0.5
    alpha0: float = 1.0
    tol: float = 1e-3
    max_outer: int = 30
    max_inner_cap: int = 20000
    seed: int = 0

    def __post_init__(self):
        if self.nu0 <= 0:
            raise ValueError("nu0 must be positive")
        if self.beta <= 1:
            raise ValueError("beta must exceed 1")
        if self.c <= 0:
            raise ValueError("c must be positive")
        if self.alpha0 <= 0:
            raise ValueError("alpha0 must be positive")
        if self.tol <= 0:
            raise ValueError("tol must be positive")


@dataclass
class OuterRecord:
    k: int
    nu: float
    inner_iters: int
    residual: float
    objective: float
    dual_norm: float
    inner_stop: str
    cap_limited: bool


@dataclass
class SolverTrace:
    records: list
    x: np.ndarray
    theta: np.ndarray
    status: str                      # converged | stalled | max_outer
    sigma_max: float
    sigma_converged: bool
    wall_time: float = 0.0

    @property
    def outer_iterations(self) -> int:
        return len(self.records)

    @property
    def total_inner_iterations(self) -> int:
        return sum(r.inner_iters for r in self.records)

    @property
    def final_residual(self) -> float:
        return self.records[-1].residual if self.records else float("nan")

    @property
    def final_objective(self) -> float:
        return self.records[-1].objective if self.records else float("nan")

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "nu", "inner_iters", "residual", "objective",
                        "dual_norm", "inner_stop", "cap_limited"])
            for r in self.records:
                w.writerow([r.k, repr(r.nu), r.inner_iters, repr(r.residual),
                            repr(r.objective), repr(r.dual_norm), r.inner_stop,
                            int(r.cap_limited)])
        return path


def _psd_project_array(mat: np.ndarray) -> np.ndarray:
    try:
        vals, vecs = np.linalg.eigh(mat)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"eigendecomposition failed on a {mat.shape[0]}x{mat.shape[0]} block "
            f"(fro norm {np.linalg.norm(mat):.3e}, finite={np.all(np.isfinite(mat))})"
        ) from exc
    pos = vals > 0.0
    if not np.any(pos):
        return np.zeros_like(mat)
    v = vecs[:, pos]
    return (v * vals[pos]) @ v.T


def psd_project(matrix) -> SymMatrix:
    """Euclidean projection onto the PSD cone (eigenvalue clipping)."""
    arr = matrix.values if isinstance(matrix, SymMatrix) else np.asarray(matrix, float)
    return SymMatrix(_psd_project_array((arr + arr.T) / 2.0))


class OperatorNorm(NamedTuple):
    sigma: float
    converged: bool
    iterations: int


def operator_norm(program: ConicProgram, tol: float = 1e-4, max_iter: int = 2000,
                  seed: int = 0) -> OperatorNorm:
    """Largest singular value of the stacked block operator, by power iteration."""
    A = program.operator
    if A.nnz == 0:
        return OperatorNorm(0.0, True, 0)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    sigma = 0.0
    for it in range(1, max_iter + 1):
        w = A @ v
        sigma_new = float(np.linalg.norm(w))
        v = A.T @ w
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return OperatorNorm(0.0, True, it)
        v /= nv
        if sigma_new > 0 and abs(sigma_new - sigma) <= tol * sigma_new:
            return OperatorNorm(sigma_new, True, it)
        sigma = sigma_new
    return OperatorNorm(sigma, False, max_iter)


def aug_lagrangian_grad(program: ConicProgram, x: np.ndarray, nu: float,
                        theta: np.ndarray) -> tuple[float, np.ndarray]:
    """Value and gradient of the smooth augmented Lagrangian part.

    Uses the cone identity z - proj(z) = -proj(-z): a single projection of
    theta + b - A(x) per block yields both the penalty distance and the
    gradient  c/nu - A*(proj(theta + b - A(x))).
    """
    c = program.objective
    w = program.apply(x)
    s = theta + program.constants - w          # equals -(A(x) - b - theta)
    proj = program.project_dual(s)
    value = float(c @ x) / nu + 0.5 * float(proj @ proj)
    grad = c / nu - program.adjoint(proj)
    return value, grad


def apg_inner(program: ConicProgram, start: np.ndarray, nu: float,
              theta: np.ndarray, L: float, eta_over_nu: float,
              ell_max: float) -> tuple[np.ndarray, int, str]:
    """Accelerated projected-gradient loop for one outer iteration.

    Stops when the projected step is at most eta_over_nu / (2 L), which
    certifies a subgradient of norm at most eta/nu, or when the iteration
    budget runs out.
    """
    c = program.objective
    b = program.constants
    A = program.operator
    project = program.simple_set.project
    threshold = eta_over_nu / (2.0 * L)

    x_prev = start.copy()      # x_{l-1}^{(1)}
    x2 = start.copy()          # extrapolated point
    t = 1.0
    ell = 0
    while True:
        ell += 1
        s = theta + b - A @ x2
        grad = c / nu - A.T @ program.project_dual(s)
        x1 = project(x2 - grad / L)
        if np.linalg.norm(x1 - x2) <= threshold:
            return x1, ell, "step_small"
        if ell > ell_max:
            return x1, ell, "iter_cap"
        t_next = (1.0 + np.sqrt(1.0 + 4.0 * t * t)) / 2.0
        x2 = x1 + ((t - 1.0) / t_next) * (x1 - x_prev)
        x_prev = x1
        t = t_next


def alcc_solve(program: ConicProgram, params: SolverParams = SolverParams(),
               x0: Optional[np.ndarray] = None) -> SolverTrace:
    """Run the full outer/inner scheme on a conic program.

    ``x0`` is the starting point (projected onto the simple set); by
    default the projection of the origin.  Status is ``converged`` when
    the relative-change stop fires with a small feasibility residual,
    ``stalled`` when it fires while still noticeably infeasible, and
    ``max_outer`` when the iteration budget is exhausted first.
    """
    t0 = time.perf_counter()
    norm_info = operator_norm(program, seed=params.seed)
    sigma = norm_info.sigma
    L = sigma * sigma if sigma > 0 else 1.0     # objective is linear: L_gamma = 0
    B = program.simple_set.diameter()

    c = program.objective
    b = program.constants
    if x0 is None:
        x0 = np.zeros(program.num_scalars)
    x = program.simple_set.project(np.asarray(x0, dtype=float))
    theta = np.zeros(len(b))

    # eta_0 from the initial composite gradient, dual started at zero
    init_proj = program.project_dual(b - program.apply(x))
    eta0 = 0.5 * float(np.linalg.norm(c - params.nu0 * program.adjoint(init_proj)))
    if eta0 == 0.0:
        eta0 = 1.0

    records = []
    status = "max_outer"
    resid_scale = 1.0 + float(np.linalg.norm(b))
    for k in range(1, params.max_outer + 1):
        nu_k = params.beta**k * params.nu0
        decay = k ** (2.0 * (1.0 + params.c)) * params.beta**k
        eta_k = eta0 / decay
        ell_exact = k ** (1.0 + params.c) * params.beta**k * B * np.sqrt(
            2.0 * params.nu0 * L / params.alpha0
        )
        cap_limited = ell_exact > params.max_inner_cap
        ell_max = min(ell_exact, float(params.max_inner_cap))

        x_new, inner, reason = apg_inner(
            program, x, nu_k, theta, L, eta_k / nu_k, ell_max
        )
        if not np.all(np.isfinite(x_new)):
            trace = SolverTrace(records, x, theta, "numerical_error", sigma,
                                norm_info.converged, time.perf_counter() - t0)
            err = NumericalError(f"non-finite iterate at outer iteration {k}")
            err.trace = trace
            raise err

        residual = program.cone_distance(x_new)
        records.append(OuterRecord(
            k=k, nu=nu_k, inner_iters=inner, residual=residual,
            objective=float(c @ x_new), dual_norm=float(np.linalg.norm(theta)),
            inner_stop=reason, cap_limited=cap_limited,
        ))

        nu_next = params.beta ** (k + 1) * params.nu0
        theta = (nu_k / nu_next) * program.project_dual(
            theta + b - program.apply(x_new)
        )

        rel_change = float(np.linalg.norm(x_new - x)) / (1.0 + float(np.linalg.norm(x)))
        x = x_new
        if rel_change <= params.tol:
            status = "converged" if residual <= 1e-3 * resid_scale else "stalled"
            break

    return SolverTrace(records, x, theta, status, sigma, norm_info.converged,
                       time.perf_counter() - t0)
