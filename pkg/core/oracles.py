"""Closed-form and brute-force references for the fiber and solver paths.

Separable kernels q = sum_j a_j(x, y) b_j(s, y) reduce every fiber problem
to an r x r system with G[j, k] = integral b_j(t, alpha) a_k(t, alpha) dt.
Those integrals use twice the production quadrature order.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from core.errors import InvalidArgumentError, SingularFiberError
from core.fiber import REGULARITY_TOL, assemble, is_singular, singular_values
from core.functions import FiberFunction
from core.grid import Domain, QuadratureGrid, QuadratureRule, build_grid
from core.kernel_model import as_view
from kernels.basis import Factor, parse_factor
from kernels.finite_rank_kernel import FiniteRankKernel

logger = logging.getLogger(__name__)

DEFAULT_ORACLE_ORDER = 64
# |det| at or below this counts as singular for the closed forms
SINGULAR_DET = 1e-12


@dataclass(frozen=True)
class SeparableSpec:
    domain: Domain
    terms: Tuple[Tuple[Factor, Factor], ...]

    def __post_init__(self):
        terms = tuple((parse_factor(a), parse_factor(b)) for a, b in self.terms)
        if not terms:
            raise InvalidArgumentError("A separable kernel needs at least one term")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def from_kernel(cls, kernel: FiniteRankKernel) -> "SeparableSpec":
        return cls(kernel.domain, tuple(kernel.terms))

    @property
    def rank(self) -> int:
        return len(self.terms)

    def kernel(self) -> FiniteRankKernel:
        return FiniteRankKernel(self.domain, list(self.terms))


@dataclass(frozen=True, eq=False)
class Rank1Reference:
    det: complex
    resolvent: Optional[Callable]     # resolvent(x, s); None when singular
    singular: bool


def _oracle_grid(domain: Domain, grid: QuadratureGrid = None) -> QuadratureGrid:
    n = 2 * grid.n if grid is not None else DEFAULT_ORACLE_ORDER
    return build_grid(domain, QuadratureRule.GAUSS_LEGENDRE, n)


def _factor_columns(spec: SeparableSpec, points: np.ndarray, alpha) -> Tuple[np.ndarray, np.ndarray]:
    """a_j and b_j at the given points, each of shape (n_points, r)"""
    y = spec.domain.as_points(alpha).reshape(1, -1)
    a = [np.broadcast_to(fa.evaluate(points, y, spec.domain), points.shape[:1]) for fa, _ in spec.terms]
    b = [np.broadcast_to(fb.evaluate(points, y, spec.domain), points.shape[:1]) for _, fb in spec.terms]
    return np.stack(a, axis=1).astype(complex), np.stack(b, axis=1).astype(complex)


def gram_matrix(spec: SeparableSpec, alpha, grid: QuadratureGrid = None) -> np.ndarray:
    """G[j, k] = integral b_j(t, alpha) a_k(t, alpha) dt"""
    oracle = _oracle_grid(spec.domain, grid)
    a, b = _factor_columns(spec, oracle.nodes, alpha)
    return b.T @ (oracle.weights[:, None] * a)


def rank1_reference(spec: SeparableSpec, kappa: complex, alpha, grid: QuadratureGrid = None) -> Rank1Reference:
    if spec.rank != 1:
        raise InvalidArgumentError(f"rank1_reference needs a rank-1 kernel, got rank {spec.rank}")
    det = complex(1 - kappa * gram_matrix(spec, alpha, grid)[0, 0])
    if abs(det) <= SINGULAR_DET:
        return Rank1Reference(det, None, True)
    (fa, fb), = spec.terms

    def resolvent(x, s):
        y = spec.domain.as_points(alpha)
        xp, sp = spec.domain.as_points(x), spec.domain.as_points(s)
        return fa.evaluate(xp, y, spec.domain) * fb.evaluate(sp, y, spec.domain) / det

    return Rank1Reference(det, resolvent, False)


def finite_rank_reference(spec: SeparableSpec, kappa: complex, alpha, grid: QuadratureGrid = None) -> complex:
    """det(I_r - kappa G)"""
    g = gram_matrix(spec, alpha, grid)
    return complex(np.linalg.det(np.eye(spec.rank) - kappa * g))


def finite_rank_resolvent(spec: SeparableSpec, kappa: complex, alpha, grid: QuadratureGrid = None) -> Callable:
    """R(x, s) = sum_jk a_j(x) [(I - kappa G)^-1]_jk b_k(s)"""
    g = gram_matrix(spec, alpha, grid)
    system = np.eye(spec.rank) - kappa * g
    if abs(np.linalg.det(system)) <= SINGULAR_DET:
        raise SingularFiberError(np.ravel(alpha).tolist(), abs(np.linalg.det(system)))
    inverse = scipy.linalg.inv(system)

    def resolvent(x, s):
        xp = spec.domain.as_points(x).reshape(-1, spec.domain.dim)
        sp = spec.domain.as_points(s).reshape(-1, spec.domain.dim)
        a, _ = _factor_columns(spec, xp, alpha)
        _, b = _factor_columns(spec, sp, alpha)
        return a @ inverse @ b.T

    return resolvent


def dense_direct_solve(kernel, grid: QuadratureGrid, kappa: complex, g0: FiberFunction,
                       tol: float = REGULARITY_TOL) -> FiberFunction:
    """Solve all fibers at once as one block-diagonal sparse system.

    Unknowns are ordered fiber-major: index k * N + i holds f(x_i, alpha_k).
    """
    view = as_view(kernel)
    if not g0.grid.same_as(grid):
        raise InvalidArgumentError("Right-hand side lives on a different quadrature grid")
    blocks = []
    for alpha in g0.fiber_grid.nodes:
        op = assemble(view, grid, alpha)
        if is_singular(op, kappa, tol):
            sigma = singular_values(op, kappa)
            raise SingularFiberError(alpha.tolist(), float(np.prod(sigma)))
        blocks.append(np.eye(grid.size) - kappa * op.matrix)

    system = scipy.sparse.block_diag(blocks, format="csc")
    rhs = np.asarray(g0.values).T.ravel()
    solution = scipy.sparse.linalg.spsolve(system, rhs)
    logger.debug("Dense direct solve: %d unknowns in %d blocks", len(rhs), len(blocks))
    return FiberFunction(np.reshape(solution, (g0.fiber_grid.size, grid.size)).T, grid, g0.fiber_grid)
