"""Fredholm determinant D_1 and first minor M_1 as truncated series.

    D_1(alpha) = 1 + sum_n (-kappa)^n / n! d_n(alpha)
    M_1(x, s, alpha) = q(x, s, alpha) + sum_n (-kappa)^n / n! q_n(x, s, alpha)

d_n and q_n are n-fold integrals of determinants built from the kernel.
Two ways to get them:

- tensor-quadrature: the literal n-fold quadrature sum of the
  determinants; cost N^n determinants, so only n <= 3.
- trace-recursion: d_n from the power sums trace(A_hat^m) through Newton's
  identities, q_n from the classical minor recursion
  B_n = d_n K - n K W B_(n-1). Both are polynomial in the node count.

The printed form of the minor series multiplies q by a sum with no constant
term, which would make M_1 vanish at kappa = 0; here the constant term q is
kept, which is the classical first minor and matches the resolvent.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import List

import numpy as np
import pandas as pd
import scipy.linalg

from core.errors import InvalidArgumentError, UnsupportedOrderError
from core.grid import QuadratureGrid, build_fiber_grid
from core.kernel_model import as_view
from core.parallel import map_fibers

logger = logging.getLogger(__name__)

MAX_TENSOR_ORDER = 3


class CoefficientMethod(Enum):
    TENSOR_QUADRATURE = "tensor-quadrature"
    TRACE_RECURSION = "trace-recursion"

    @classmethod
    def parse(cls, value) -> "CoefficientMethod":
        try:
            return cls(value)
        except ValueError:
            raise InvalidArgumentError(f"Unknown coefficient method '{value}'")


@dataclass(frozen=True)
class SeriesConfig:
    max_order: int = 40
    tail_tol: float = 1e-14
    coefficient_method: CoefficientMethod = CoefficientMethod.TRACE_RECURSION

    def __post_init__(self):
        object.__setattr__(self, "coefficient_method", CoefficientMethod.parse(self.coefficient_method))
        if int(self.max_order) != self.max_order or self.max_order < 1:
            raise InvalidArgumentError(f"max_order must be a positive integer, got {self.max_order}")
        if not self.tail_tol > 0:
            raise InvalidArgumentError(f"tail_tol must be positive, got {self.tail_tol}")
        if self.coefficient_method == CoefficientMethod.TENSOR_QUADRATURE and self.max_order > MAX_TENSOR_ORDER:
            raise UnsupportedOrderError(
                f"tensor-quadrature supports orders up to {MAX_TENSOR_ORDER}, got max_order={self.max_order}"
            )


@dataclass(frozen=True, eq=False)
class SeriesResult:
    value: object            # complex, or a node-pair matrix for minor_matrix_series
    tail_bound: float
    order_used: int
    converged: bool


def _points(view, points, name: str) -> np.ndarray:
    domain = view.domain
    arr = domain.as_points(points).reshape(-1, domain.dim)
    domain.check_contains(arr, name)
    return arr


def _alpha(view, alpha) -> np.ndarray:
    return _points(view, alpha, "alpha")[0]


def pi_n(kernel_view, xs, ss, alpha) -> complex:
    """det[q(x_i, s_j, alpha)] for n points x_1..x_n and s_1..s_n"""
    view = as_view(kernel_view)
    x = _points(view, xs, "x")
    s = _points(view, ss, "s")
    if len(x) != len(s) or len(x) < 1:
        raise InvalidArgumentError(f"pi_n needs n >= 1 points on each side, got {len(x)} and {len(s)}")
    a = _alpha(view, alpha)
    matrix = view.evaluate(x[:, None, :], s[None, :, :], a[None, None, :])
    matrix = np.broadcast_to(matrix, (len(x), len(s)))
    return complex(np.linalg.det(matrix))


def _tuples(n_nodes: int, k: int) -> np.ndarray:
    """All ordered k-tuples of node indices, shape (n_nodes^k, k)"""
    return np.indices((n_nodes,) * k).reshape(k, -1).T


def _elementary_coefficients(a_hat: np.ndarray, order: int) -> List[complex]:
    """e_0..e_order of the eigenvalues of a_hat (det(I - kappa A) = sum (-kappa)^n e_n) via Newton's identities"""
    power_sums = []
    power = a_hat
    for m in range(order):
        power_sums.append(complex(np.trace(power)))
        if m + 1 < order:
            power = power @ a_hat
    e = [1.0 + 0j]
    for n in range(1, order + 1):
        total = 0j
        for i in range(1, n + 1):
            total += (-1) ** (i - 1) * e[n - i] * power_sums[i - 1]
        e.append(total / n)
    return e


def _symmetrized(samples: np.ndarray, weights: np.ndarray) -> np.ndarray:
    root = np.sqrt(weights)
    return root[:, None] * samples * root[None, :]


def d_k(kernel_view, grid: QuadratureGrid, alpha, k: int, method=CoefficientMethod.TRACE_RECURSION) -> complex:
    method = CoefficientMethod.parse(method)
    if int(k) != k or k < 1:
        raise InvalidArgumentError(f"d_k needs k >= 1, got {k}")
    k = int(k)
    view = as_view(kernel_view)
    samples = view.fiber_samples(grid, _alpha(view, alpha))
    w = grid.weights

    if method == CoefficientMethod.TENSOR_QUADRATURE:
        if k > MAX_TENSOR_ORDER:
            raise UnsupportedOrderError(f"tensor-quadrature supports k <= {MAX_TENSOR_ORDER}, got {k}")
        idx = _tuples(grid.size, k)
        blocks = samples[idx[:, :, None], idx[:, None, :]]
        return complex(np.sum(np.prod(w[idx], axis=1) * np.linalg.det(blocks)))

    e = _elementary_coefficients(_symmetrized(samples, w), k)
    return complex(math.factorial(k) * e[k])


def _bordered_inputs(view, grid, x, s, alpha):
    """q(x, t_i), q(t_i, s), q(x, s) and the node matrix on one fiber"""
    xp = _points(view, x, "x")[0]
    sp = _points(view, s, "s")[0]
    a = _alpha(view, alpha)
    nodes = grid.nodes
    kx = np.broadcast_to(view.evaluate(xp[None, :], nodes, a[None, :]), (grid.size,))
    ks = np.broadcast_to(view.evaluate(nodes, sp[None, :], a[None, :]), (grid.size,))
    kxs = complex(view.evaluate(xp, sp, a))
    samples = view.fiber_samples(grid, a)
    return samples, kx, ks, kxs


def _minor_recursion(samples, weights, kx, ks, kxs, order: int) -> List[complex]:
    """Scaled minor coefficients q_n(x, s) / n! for n = 0..order"""
    scaled = [kxs]
    c = 1.0 + 0j
    block = samples                # B_n / n! at node pairs
    column = ks                    # B_n(t, s) / n!
    for n in range(1, order + 1):
        c = np.sum(weights * np.diag(block)) / n
        scaled.append(c * kxs - np.sum(kx * weights * column))
        column = c * ks - samples @ (weights * column)
        block = c * samples - samples @ (weights[:, None] * block)
    return scaled


def q_k(kernel_view, grid: QuadratureGrid, x, s, alpha, k: int, method=CoefficientMethod.TRACE_RECURSION) -> complex:
    method = CoefficientMethod.parse(method)
    if int(k) != k or k < 0:
        raise InvalidArgumentError(f"q_k needs k >= 0, got {k}")
    k = int(k)
    view = as_view(kernel_view)
    samples, kx, ks, kxs = _bordered_inputs(view, grid, x, s, alpha)
    if k == 0:
        return kxs
    w = grid.weights

    if method == CoefficientMethod.TENSOR_QUADRATURE:
        if k > MAX_TENSOR_ORDER:
            raise UnsupportedOrderError(f"tensor-quadrature supports k <= {MAX_TENSOR_ORDER}, got {k}")
        idx = _tuples(grid.size, k)
        bordered = np.empty((len(idx), k + 1, k + 1), dtype=complex)
        bordered[:, 0, 0] = kxs
        bordered[:, 0, 1:] = kx[idx]
        bordered[:, 1:, 0] = ks[idx]
        bordered[:, 1:, 1:] = samples[idx[:, :, None], idx[:, None, :]]
        return complex(np.sum(np.prod(w[idx], axis=1) * np.linalg.det(bordered)))

    scaled = _minor_recursion(samples, w, kx, ks, kxs, k)
    return complex(math.factorial(k) * scaled[k])


def _sum_series(terms, cfg: SeriesConfig, start, remainder) -> SeriesResult:
    """Add terms until the last one and remainder(order) are both <= tail_tol.

    remainder(n) bounds the sum of all terms past order n; the reported
    tail_bound is the larger of it and the last term's magnitude.
    """
    value = start
    bound = np.inf
    order = 0
    for order, term in enumerate(terms, start=1):
        value = value + term
        magnitude = float(np.max(np.abs(term)))
        bound = max(magnitude, remainder(order))
        if bound <= cfg.tail_tol:
            return SeriesResult(value, bound, order, True)
    logger.debug("Series reached order %d with tail bound %.3e > %.3e", order, bound, cfg.tail_tol)
    return SeriesResult(value, bound, order, False)


def _singular_majorants(a_hat: np.ndarray, kappa: complex) -> np.ndarray:
    """e_0, e_1, ... of the singular values of |kappa| A_hat.

    |kappa|^n |e_n(eigenvalues)| <= e_n(|kappa| sigma), so partial sums of
    these bound the determinant and minor tails. Singular values at rounding
    level are dropped; they make a numerically finite-rank fiber look full rank.
    """
    sigma = scipy.linalg.svdvals(a_hat)
    if sigma.size:
        sigma = sigma[sigma > a_hat.shape[0] * np.finfo(float).eps * sigma[0]]
    e = np.zeros(sigma.size + 1)
    e[0] = 1.0
    with np.errstate(over="ignore"):
        for s in abs(kappa) * sigma:
            e[1:] = e[1:] + s * e[:-1]
    return e


def _tail_sums(majorants: np.ndarray):
    """tail(n) = sum of majorants past index n"""
    suffix = np.append(np.cumsum(majorants[::-1])[::-1], 0.0)

    def tail(n):
        return float(suffix[n + 1]) if n + 1 < len(suffix) else 0.0

    return tail


def _minor_remainder(majorants: np.ndarray, kappa: complex, diagonal: float, border: float):
    """Tail of M_1 = D q + kappa (K W^1/2) adj(I - kappa A_hat) (W^1/2 K) at one point.

    diagonal bounds |q(x, s)|, border bounds ||W^1/2 q(x, .)|| * ||W^1/2 q(., s)||.
    """
    tail = _tail_sums(majorants)
    return lambda n: diagonal * tail(n) + abs(kappa) * border * tail(n - 1)


def determinant_series(kernel_view, grid: QuadratureGrid, alpha, kappa: complex, cfg: SeriesConfig = None) -> SeriesResult:
    cfg = cfg or SeriesConfig()
    if kappa == 0:
        return SeriesResult(1.0 + 0j, 0.0, 0, True)
    view = as_view(kernel_view)
    a_hat = _symmetrized(view.fiber_samples(grid, _alpha(view, alpha)), grid.weights)

    if cfg.coefficient_method == CoefficientMethod.TENSOR_QUADRATURE:
        terms = (
            (-kappa) ** n / math.factorial(n) * d_k(view, grid, alpha, n, cfg.coefficient_method)
            for n in range(1, cfg.max_order + 1)
        )
    else:
        e = _elementary_coefficients(a_hat, cfg.max_order)
        terms = ((-kappa) ** n * e[n] for n in range(1, cfg.max_order + 1))
    result = _sum_series(terms, cfg, 1.0 + 0j, _tail_sums(_singular_majorants(a_hat, kappa)))
    return SeriesResult(complex(result.value), result.tail_bound, result.order_used, result.converged)


def minor_series(kernel_view, grid: QuadratureGrid, x, s, alpha, kappa: complex, cfg: SeriesConfig = None) -> SeriesResult:
    cfg = cfg or SeriesConfig()
    view = as_view(kernel_view)
    samples, kx, ks, kxs = _bordered_inputs(view, grid, x, s, alpha)
    if kappa == 0:
        return SeriesResult(kxs, 0.0, 0, True)
    w = grid.weights

    if cfg.coefficient_method == CoefficientMethod.TENSOR_QUADRATURE:
        terms = (
            (-kappa) ** n / math.factorial(n) * q_k(view, grid, x, s, alpha, n, cfg.coefficient_method)
            for n in range(1, cfg.max_order + 1)
        )
    else:
        scaled = _minor_recursion(samples, w, kx, ks, kxs, cfg.max_order)
        terms = ((-kappa) ** n * scaled[n] for n in range(1, cfg.max_order + 1))
    border = float(np.sqrt(w @ np.abs(kx) ** 2) * np.sqrt(w @ np.abs(ks) ** 2))
    remainder = _minor_remainder(_singular_majorants(_symmetrized(samples, w), kappa), kappa, abs(kxs), border)
    result = _sum_series(terms, cfg, kxs, remainder)
    return SeriesResult(complex(result.value), result.tail_bound, result.order_used, result.converged)


def minor_matrix_series(kernel_view, grid: QuadratureGrid, alpha, kappa: complex, cfg: SeriesConfig = None) -> SeriesResult:
    """M_1 at every node pair of one fiber, by the matrix form of the minor recursion"""
    cfg = cfg or SeriesConfig()
    view = as_view(kernel_view)
    samples = np.array(view.fiber_samples(grid, _alpha(view, alpha)), dtype=complex)
    if kappa == 0:
        return SeriesResult(samples, 0.0, 0, True)
    w = grid.weights

    def terms():
        block = samples
        for n in range(1, cfg.max_order + 1):
            c = np.sum(w * np.diag(block)) / n
            block = c * samples - samples @ (w[:, None] * block)
            yield (-kappa) ** n * block

    row_norms = np.sqrt(np.abs(samples) ** 2 @ w)
    column_norms = np.sqrt(w @ np.abs(samples) ** 2)
    remainder = _minor_remainder(
        _singular_majorants(_symmetrized(samples, w), kappa), kappa,
        float(np.max(np.abs(samples))), float(row_norms.max() * column_norms.max()),
    )
    return _sum_series(terms(), cfg, samples, remainder)


def integrability_checks(kernel_view, grid: QuadratureGrid, kappa: complex, fiber_grid: QuadratureGrid = None,
                         cfg: SeriesConfig = None, workers: int = 1) -> pd.DataFrame:
    """Per fiber: finiteness of D_1 and M_1 samples and the quadrature of |M_1|^2.

    Measurability has no content on a grid; every sampled function is
    measurable, so only finiteness and square-integrability are checked.
    """
    view = as_view(kernel_view)
    fiber_grid = fiber_grid or build_fiber_grid(grid)
    cfg = cfg or SeriesConfig()
    w = grid.weights

    def check(k):
        alpha = fiber_grid.nodes[k]
        det = determinant_series(view, grid, alpha, kappa, cfg)
        minor = minor_matrix_series(view, grid, alpha, kappa, cfg)
        minor_finite = bool(np.all(np.isfinite(minor.value)))
        l2_sq = float(w @ (np.abs(minor.value) ** 2) @ w) if minor_finite else np.inf
        return {
            "alpha": float(alpha[0]) if len(alpha) == 1 else tuple(float(a) for a in alpha),
            "det_re": det.value.real,
            "det_im": det.value.imag,
            "det_finite": bool(np.isfinite(det.value)),
            "minor_finite": minor_finite,
            "minor_l2_sq": l2_sq,
            "converged": det.converged and minor.converged,
        }

    rows = map_fibers(check, range(fiber_grid.size), workers)
    report = pd.DataFrame(rows)
    report["all_finite"] = report["det_finite"] & report["minor_finite"] & np.isfinite(report["minor_l2_sq"])
    return report
