"""Fiber operators S_alpha discretized by the Nystrom method.

For a fixed fiber alpha the operator phi -> integral q(x, s, alpha) phi(s) ds
becomes the matrix A = K W with K[i, j] = q(x_i, x_j, alpha) and
W = diag(w). Determinants and singular values use the weight-symmetrized
matrix A_hat = W^1/2 K W^1/2, which is similar to A and whose adjoint is
its conjugate transpose. Solves use I - kappa K W directly.

Every function here is a pure function of its inputs, so mapping them over
fibers concurrently gives the same results as a sequential loop.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from core.errors import InvalidArgumentError, SingularFiberError
from core.functions import FiberFunction
from core.grid import QuadratureGrid
from core.kernel_model import as_view
from core.parallel import map_fibers

logger = logging.getLogger(__name__)

# A fiber is numerically singular when sigma_min(I - kappa A_hat) <= REGULARITY_TOL * sigma_max
REGULARITY_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class FiberOperator:
    alpha: np.ndarray
    samples: np.ndarray = field(repr=False)   # K
    grid: QuadratureGrid = field(repr=False)

    def __post_init__(self):
        n = self.grid.size
        if self.samples.shape != (n, n):
            raise InvalidArgumentError(f"Fiber samples must be {n}x{n}, got {self.samples.shape}")

    @property
    def matrix(self) -> np.ndarray:
        """Nystrom matrix A[i, j] = q(x_i, x_j, alpha) * w_j"""
        return self.samples * self.grid.weights[None, :]

    @property
    def symmetrized(self) -> np.ndarray:
        root = np.sqrt(self.grid.weights)
        return root[:, None] * self.samples * root[None, :]

    @property
    def size(self) -> int:
        return self.grid.size


def assemble(kernel_view, grid: QuadratureGrid, alpha) -> FiberOperator:
    view = as_view(kernel_view)
    alpha = view.domain.as_points(alpha).reshape(-1)
    view.domain.check_contains(alpha, "alpha")
    samples = np.array(view.fiber_samples(grid, alpha), dtype=complex)
    samples.setflags(write=False)
    alpha.setflags(write=False)
    return FiberOperator(alpha=alpha, samples=samples, grid=grid)


def _system(op: FiberOperator, kappa: complex) -> np.ndarray:
    """I - kappa * A_hat"""
    return np.eye(op.size) - kappa * op.symmetrized


def fiber_determinant(op: FiberOperator, kappa: complex) -> complex:
    return complex(np.linalg.det(_system(op, kappa)))


def singular_values(op: FiberOperator, kappa: complex) -> np.ndarray:
    """Singular values of I - kappa A_hat, descending"""
    return scipy.linalg.svdvals(_system(op, kappa))


def is_singular(op: FiberOperator, kappa: complex, tol: float = REGULARITY_TOL) -> bool:
    sigma = singular_values(op, kappa)
    return bool(sigma[-1] <= tol * sigma[0])


def determinant_threshold(op: FiberOperator, kappa: complex, tol: float = REGULARITY_TOL) -> float:
    """Threshold T with |det(I - kappa A_hat)| <= T exactly when the fiber is singular.

    |det| = sigma_min * prod(other sigmas), so |det| <= tol * sigma_max * prod(other
    sigmas) is the same test as sigma_min <= tol * sigma_max.
    """
    sigma = singular_values(op, kappa)
    return float(tol * sigma[0] * np.prod(sigma[:-1]))


def fiber_eigenvalues(op: FiberOperator) -> np.ndarray:
    return np.linalg.eigvals(op.symmetrized)


def _require_regular(op: FiberOperator, kappa: complex, tol: float):
    if is_singular(op, kappa, tol):
        det_abs = abs(fiber_determinant(op, kappa))
        raise SingularFiberError(op.alpha.tolist(), det_abs)


def fiber_solve(op: FiberOperator, kappa: complex, rhs, tol: float = REGULARITY_TOL) -> np.ndarray:
    """Solve phi - kappa A phi = rhs on a regular fiber"""
    rhs = np.asarray(rhs, dtype=complex)
    if rhs.shape != (op.size,):
        raise InvalidArgumentError(f"Right-hand side needs {op.size} samples, got shape {rhs.shape}")
    _require_regular(op, kappa, tol)
    return scipy.linalg.solve(np.eye(op.size) - kappa * op.matrix, rhs)


@dataclass(frozen=True, eq=False)
class FiberNullspace:
    alpha: np.ndarray
    kappa: complex
    basis: np.ndarray = field(repr=False)   # shape (dim, N), node samples
    sigma_min: float

    @property
    def dim(self) -> int:
        return self.basis.shape[0]


def fiber_nullspace(op: FiberOperator, kappa: complex, tol: float = REGULARITY_TOL) -> FiberNullspace:
    """Weighted-orthonormal basis of the numerical nullspace of phi - kappa A phi"""
    if not tol > 0:
        raise InvalidArgumentError(f"Nullspace tolerance must be positive, got {tol}")
    _, sigma, vh = scipy.linalg.svd(_system(op, kappa))
    if sigma[0] == 0:
        null = np.ones_like(sigma, dtype=bool)
    else:
        null = sigma <= tol * sigma[0]
    # (I - kappa A_hat) v = 0  <=>  (I - kappa K W) W^-1/2 v = 0, and the weighted
    # inner product of W^-1/2 v equals the Euclidean one of v
    vectors = np.conj(vh[null]) / np.sqrt(op.grid.weights)[None, :]
    return FiberNullspace(alpha=op.alpha, kappa=complex(kappa), basis=vectors, sigma_min=float(sigma[-1]))


def resolvent_kernel(op: FiberOperator, kappa: complex, tol: float = REGULARITY_TOL) -> np.ndarray:
    """R = (I - kappa K W)^-1 K, the node samples of M_1 / D_1"""
    _require_regular(op, kappa, tol)
    return scipy.linalg.solve(np.eye(op.size) - kappa * op.matrix, op.samples)


def apply_pio(kernel_view, f: FiberFunction, workers: int = 1) -> FiberFunction:
    """(Sf)(x_i, alpha_k) = sum_j w_j q(x_i, x_j, alpha_k) f(x_j, alpha_k)"""
    view = as_view(kernel_view)
    w = f.grid.weights

    def apply_one(k):
        samples = view.fiber_samples(f.grid, f.fiber_grid.nodes[k])
        return samples @ (w * f.fiber(k))

    columns = map_fibers(apply_one, range(f.fiber_grid.size), workers)
    return FiberFunction(np.stack(columns, axis=1), f.grid, f.fiber_grid)
