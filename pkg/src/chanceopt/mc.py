"""Monte Carlo probability estimation and grid-search baseline.

For a fixed decision, the probability of the union is estimated by the
fraction of random-parameter draws that land in at least one set (a draw
in several sets counts once); membership is non-strict, so boundary
points count as inside.  The grid search evaluates that estimator on a
uniform grid over the decision box with a fixed sample budget per point
and per-point derived seeds, so results do not depend on evaluation
order.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Sequence

import numpy as np

from .errors import DimensionError, ResourceError
from .measures import sample
from .poly import grevlex_key
from .relaxation import ChanceProblem

_GRID_GUARD = 10**7


@dataclass(frozen=True)
class McConfig:
    samples: int = 100_000
    grid_points: int = 41
    seed: int = 0

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be at least 1")
        if self.grid_points < 1:
            raise ValueError("grid_points must be at least 1")


def _union_membership(problem: ChanceProblem, x: np.ndarray,
                      draws: np.ndarray) -> np.ndarray:
    points = np.empty((draws.shape[0], problem.n + problem.m))
    points[:, : problem.n] = x
    points[:, problem.n:] = draws
    member = np.zeros(draws.shape[0], dtype=bool)
    for s in problem.sets:
        inside = ~member          # only points not yet counted need checking
        for p in s:
            if not inside.any():
                break
            inside[inside] = p.eval_many(points[inside]) >= 0.0
        member |= inside
    return member


def estimate_probability(problem: ChanceProblem, x: Sequence[float],
                         cfg: McConfig) -> tuple[float, float]:
    """Estimate the union probability at decision ``x``.

    Returns the sample mean and the binomial 3-sigma half width.
    Deterministic for a fixed seed.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.n,):
        raise DimensionError(f"decision has shape {x.shape}, expected ({problem.n},)")
    draws = sample(problem.dist, cfg.samples, cfg.seed)
    est = float(np.mean(_union_membership(problem, x, draws)))
    half = 3.0 * float(np.sqrt(est * (1.0 - est) / cfg.samples))
    return est, half


def grid_search(problem: ChanceProblem, cfg: McConfig) -> tuple[np.ndarray, float]:
    """Exhaustive baseline: best grid point of the decision box.

    Ties are broken toward the lowest grid index in graded reverse
    lexicographic order, making the result deterministic.
    """
    total = cfg.grid_points**problem.n
    if total > _GRID_GUARD:
        raise ResourceError(
            f"{cfg.grid_points}^{problem.n} = {total} grid evaluations exceed "
            f"the {_GRID_GUARD} guard; use a coarser grid"
        )
    axes = [np.linspace(lo, hi, cfg.grid_points) for lo, hi in problem.decision_box]

    best_est = -1.0
    best_idx = None
    best_x = None
    for flat, idx in enumerate(product(range(cfg.grid_points), repeat=problem.n)):
        x = np.array([axes[i][idx[i]] for i in range(problem.n)])
        # per-point derived seed: independent of evaluation order, no
        # up-front allocation for huge grids
        draws = sample(problem.dist, cfg.samples,
                       np.random.SeedSequence([cfg.seed, flat]))
        est = float(np.mean(_union_membership(problem, x, draws)))
        if est > best_est or (est == best_est and grevlex_key(idx) < grevlex_key(best_idx)):
            best_est, best_idx, best_x = est, idx, x
    return best_x, best_est
