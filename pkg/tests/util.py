"""Shared helpers for the test suite."""

import numpy as np
import scipy.sparse as sp

from chanceopt.conic import ConicProgram, PsdBlock, SimpleSet, svec, triu_info
from chanceopt.measures import DistributionSpec, Uniform
from chanceopt.moments import MomentVector
from chanceopt.poly import Polynomial
from chanceopt.relaxation import ChanceProblem


def toy_problem() -> ChanceProblem:
    """One decision, one uniform parameter, the quartic single-set instance."""
    x = Polynomial.coordinate(2, 0)
    q = Polynomial.coordinate(2, 1)
    s = x - 0.5
    p = 0.5 * q * (q**2 + s**2) - (q**4 + q**2 * s**2 + s**4)
    return ChanceProblem(
        name="toy", n=1, m=1, sets=((p,),),
        dist=DistributionSpec((Uniform(-1.0, 1.0),)),
        decision_box=((-1.0, 1.0),),
    )


def toy_feasible_region(x_val: float) -> list:
    """Intervals of q in [-1, 1] where the toy constraint holds at x_val.

    The constraint polynomial is quartic in q, so the region boundary comes
    from real root isolation; endpoints are polished by the factored form.
    """
    p = toy_problem().sets[0][0]
    coeffs = np.zeros(5)
    for (ex, eq), c in p.terms.items():
        coeffs[eq] += c * x_val**ex
    # numpy wants highest degree first
    roots = np.roots(coeffs[::-1])
    cuts = sorted({-1.0, 1.0} | {
        float(r.real) for r in roots
        if abs(r.imag) < 1e-9 and -1.0 <= r.real <= 1.0
    })
    intervals = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        mid = (lo + hi) / 2.0
        if np.polyval(coeffs[::-1], mid) >= 0.0:
            intervals.append((lo, hi))
    return intervals


def toy_restricted_moments(x_val: float, order: int) -> MomentVector:
    """Moments over q of the uniform law restricted to the toy feasible set."""
    vals = np.zeros(order + 1)
    for lo, hi in toy_feasible_region(x_val):
        for k in range(order + 1):
            vals[k] += (hi ** (k + 1) - lo ** (k + 1)) / (2.0 * (k + 1))
    return MomentVector(1, order, vals)


def toy_feasible_point(program, x_val: float) -> np.ndarray:
    """Build a genuinely measure-backed feasible vector for a toy chance program.

    The decision measure is the point mass at x_val; the joint measure is
    the product measure restricted to the constraint set.  All program
    blocks are then moment matrices of true measures, hence PSD.
    """
    from chanceopt.moments import CHEBYSHEV, MomentVector, chebyshev_transform

    info = program.meta["info"]
    prob = info.scaled.problem
    order = 2 * info.order
    restricted = toy_restricted_moments(x_val, order)

    # joint moments of (dirac at x) x (restricted uniform): value at (a, b)
    # is x^a times the restricted moment b
    joint = np.zeros(info.set_slices[0].stop - info.set_slices[0].start)
    from chanceopt.poly import exponents
    for t, theta in enumerate(exponents(2, order)):
        joint[t] = x_val ** theta[0] * restricted.values[theta[1]]
    y_x = MomentVector.from_dirac([x_val], order)

    if info.basis == CHEBYSHEV:
        joint = chebyshev_transform(2, order) @ joint
        y_x = MomentVector.from_dirac([x_val], order, basis=CHEBYSHEV)

    vec = np.zeros(program.num_scalars)
    vec[info.set_slices[0]] = joint
    vec[info.yx_slice] = y_x.values
    return vec


def planted_program(rng, num_scalars=None, block_dims=None):
    """Random conic program with a known strictly complementary optimum.

    Per block, a boundary matrix S (PSD, rank-deficient) and a dual
    certificate Z (PSD, complementary support, ranks adding to the
    dimension) are planted at a random interior point x*; the objective is
    the adjoint of Z, making (x*, Z) a KKT pair of
    min c.x  s.t.  sum x_i C_i - C_0 in PSD, x in [-1, 1]^S.

    Returns (program, x_star, optimal_value).
    """
    if num_scalars is None:
        num_scalars = int(rng.integers(6, 31))
    if block_dims is None:
        block_dims = [int(d) for d in rng.integers(2, 7, size=rng.integers(1, 4))]
    x_star = rng.uniform(-0.6, 0.6, num_scalars)

    blocks = []
    c = np.zeros(num_scalars)
    for bi, dim in enumerate(block_dims):
        rows, cols, scale = triu_info(dim)
        basis_mats = rng.standard_normal((num_scalars, dim, dim))
        basis_mats = (basis_mats + basis_mats.transpose(0, 2, 1)) / 2.0

        q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        rank_s = int(rng.integers(1, dim))        # strict complementarity:
        eig_s = np.zeros(dim)                     # rank(S) + rank(Z) = dim
        eig_s[:rank_s] = rng.uniform(0.5, 2.0, rank_s)
        eig_z = np.zeros(dim)
        eig_z[rank_s:] = rng.uniform(0.5, 2.0, dim - rank_s)
        s_mat = (q * eig_s) @ q.T
        z_mat = (q * eig_z) @ q.T

        constant = np.einsum("i,ijk->jk", x_star, basis_mats) - s_mat
        coeffs = sp.csr_matrix(
            np.stack([svec(basis_mats[i]) for i in range(num_scalars)], axis=1)
        )
        blocks.append(PsdBlock(dim=dim, label=f"planted[{bi}]",
                               coeffs=coeffs, constant=constant))
        c += np.array([float(np.sum(basis_mats[i] * z_mat))
                       for i in range(num_scalars)])

    simple = SimpleSet(
        lower=np.full(num_scalars, -1.0),
        upper=np.full(num_scalars, 1.0),
        pinned_idx=np.array([], dtype=int),
        pinned_val=np.array([]),
    )
    program = ConicProgram(objective=c, blocks=blocks, simple_set=simple)
    return program, x_star, float(c @ x_star)
