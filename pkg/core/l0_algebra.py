"""L0-valued inner product, fiberwise orthonormalization, nabla-independence
and the Bessel bound on the number of independent eigenfunctions.

A property holds "for almost all alpha" when it holds at every fiber node.
"""
import logging
import math
from typing import Callable, List, Sequence, Tuple

import numpy as np

from core.errors import InvalidArgumentError
from core.functions import FiberFunction, L0Scalar, NablaMask
from core.grid import QuadratureGrid, build_fiber_grid
from core.kernel_model import as_view, bound_function

logger = logging.getLogger(__name__)

RANK_TOL = 1e-8
BESSEL_CHECK_TOL = 1e-8


def inner(f: FiberFunction, g: FiberFunction) -> L0Scalar:
    """<f, g>(alpha) = sum_i w_i f(x_i, alpha) conj(g(x_i, alpha))"""
    f.check_compatible(g)
    return L0Scalar(f.grid.weights @ (f.values * np.conj(g.values)), f.fiber_grid)


def scale(b: L0Scalar, f: FiberFunction) -> FiberFunction:
    """(b o f)(x, y) = b(y) f(x, y)"""
    f.check_compatible(b)
    return FiberFunction(f.values * b.values[None, :], f.grid, f.fiber_grid)


def _check_family(fs: Sequence[FiberFunction]) -> List[FiberFunction]:
    fs = list(fs)
    for f in fs[1:]:
        fs[0].check_compatible(f)
    return fs


def _check_tol(rank_tol: float):
    if not rank_tol > 0:
        raise InvalidArgumentError(f"rank_tol must be positive, got {rank_tol}")


def l0_orthonormalize(fs: Sequence[FiberFunction], rank_tol: float = RANK_TOL) -> Tuple[List[FiberFunction], List[NablaMask]]:
    """Gram-Schmidt on every fiber at once.

    Each input is projected off the previous outputs twice (classical
    Gram-Schmidt with one reorthogonalization). A fiber drops out of an
    output's support when what is left has norm <= rank_tol times the
    input's norm there; the output is zero on such fibers.
    """
    _check_tol(rank_tol)
    fs = _check_family(fs)
    if not fs:
        return [], []
    w = fs[0].grid.weights

    basis = []
    outputs, masks = [], []
    for f in fs:
        v = np.array(f.values, dtype=complex)
        for _ in range(2):
            for q in basis:
                coef = w @ (v * np.conj(q))
                v -= q * coef[None, :]
        original = np.sqrt(w @ np.abs(f.values) ** 2)
        norm = np.sqrt(w @ np.abs(v) ** 2)
        support = (original > 0) & (norm > rank_tol * original)
        safe = np.where(support, norm, 1.0)
        q = np.where(support[None, :], v / safe[None, :], 0.0)
        basis.append(q)
        outputs.append(FiberFunction(q, f.grid, f.fiber_grid))
        masks.append(NablaMask(support))
    return outputs, masks


def gram_matrices(fs: Sequence[FiberFunction]) -> np.ndarray:
    """G[k, i, j] = <f_j, f_i>(alpha_k), Hermitian positive semidefinite per fiber"""
    fs = _check_family(fs)
    stacked = np.stack([f.values for f in fs], axis=-1)          # (N_x, N_y, m)
    w = fs[0].grid.weights
    return np.einsum("i,ikp,ikq->kpq", w, np.conj(stacked), stacked)


def nabla_independent(fs: Sequence[FiberFunction], rank_tol: float = RANK_TOL,
                      mask: NablaMask = None) -> Tuple[bool, NablaMask]:
    """Fiberwise linear independence outside a set of no fiber nodes.

    Returns the verdict and the mask of fibers whose Gram matrix is
    rank-deficient. With a mask, only the marked fibers are examined.
    """
    _check_tol(rank_tol)
    fs = _check_family(fs)
    if not fs:
        return True, NablaMask.empty(0)
    n_fibers = fs[0].fiber_grid.size
    if mask is not None and len(mask.flags) != n_fibers:
        raise InvalidArgumentError(f"Mask has {len(mask.flags)} flags for {n_fibers} fibers")

    eigen = np.linalg.eigvalsh(gram_matrices(fs))                # ascending per fiber
    sigma_max = eigen[:, -1]
    deficient = (sigma_max <= 0) | (eigen[:, 0] <= rank_tol * sigma_max)
    if mask is not None:
        deficient &= mask.flags
    witness = NablaMask(deficient)
    if not witness.is_empty():
        logger.debug("Family of %d functions is dependent on %d fibers", len(fs), witness.count)
    return witness.is_empty(), witness


def bessel_bound(kernel, grid: QuadratureGrid, lam: complex,
                 fiber_grid: QuadratureGrid = None) -> Tuple[int, Callable]:
    """Upper bound on the number of L0-orthonormal eigenfunctions with eigenvalue lam.

    m_max = floor(|lam|^-2 * integral |q|^2 over Omega^3). The returned
    lhs_check(family, side="direct") verifies the pointwise Bessel
    inequality |lam|^2 sum_j |f_j(x, y)|^2 <= integral |q(x, s, y)|^2 ds at
    every grid point; side="adjoint" uses integral |q(s, x, y)|^2 ds, the
    bound that holds for eigenfunctions of the adjoint.
    """
    if lam == 0:
        raise InvalidArgumentError("bessel_bound needs a nonzero eigenvalue")
    view = as_view(kernel)
    fiber_grid = fiber_grid or build_fiber_grid(grid)
    profile, _ = bound_function(view, grid, fiber_grid)
    total = float(np.dot(fiber_grid.weights, profile.values.real))
    ratio = total / abs(lam) ** 2
    m_max = int(math.floor(ratio + 1e-9 * max(1.0, ratio)))
    logger.debug("Bessel bound: integral |q|^2 = %.6g, |lam| = %.6g, m_max = %d", total, abs(lam), m_max)

    w = grid.weights

    def lhs_check(family, side: str = "direct", tol: float = BESSEL_CHECK_TOL) -> bool:
        functions = list(getattr(family, "functions", family))
        if side not in ("direct", "adjoint"):
            raise InvalidArgumentError(f"side must be 'direct' or 'adjoint', got {side!r}")
        if not functions:
            return True
        lhs = abs(lam) ** 2 * sum(np.abs(f.values) ** 2 for f in functions)
        rhs = np.empty_like(lhs)
        for k, alpha in enumerate(fiber_grid.nodes):
            squared = np.abs(view.fiber_samples(grid, alpha)) ** 2
            rhs[:, k] = squared @ w if side == "direct" else w @ squared
        excess = lhs - rhs - tol * np.maximum(1.0, rhs)
        worst = float(excess.max())
        if worst > 0:
            logger.warning("Bessel inequality fails on the %s side by %.3e", side, worst)
        return worst <= 0

    return m_max, lhs_check
