"""Kernel views: the plain kernel q, its adjoint and deflated kernels p.

A view is what every fiber computation evaluates. Views are immutable and
may be shared between fiber workers.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Tuple, Union

import numpy as np

from core.errors import EvaluationError, InvalidArgumentError
from core.functions import FiberFunction, L0Scalar
from core.grid import QuadratureGrid, build_fiber_grid
from kernels.base_kernel import BaseKernel

logger = logging.getLogger(__name__)


class ViewMode(Enum):
    PLAIN = "plain"
    ADJOINT = "adjoint"
    DEFLATED = "deflated"


@dataclass(frozen=True, eq=False)
class KernelView:
    base: Union[BaseKernel, "KernelView"]
    mode: ViewMode = ViewMode.PLAIN
    # (f_j, g_j) pairs for deflation: p = q - sum_j conj(f_j(s, y)) * g_j(x, y)
    pairs: Tuple[Tuple[FiberFunction, FiberFunction], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "mode", ViewMode(self.mode))
        object.__setattr__(self, "pairs", tuple(tuple(pair) for pair in self.pairs))
        if self.mode == ViewMode.DEFLATED:
            for f, g in self.pairs:
                f.check_compatible(g)
                if not np.all(np.isfinite(f.values)) or not np.all(np.isfinite(g.values)):
                    raise InvalidArgumentError("Deflation pairs must be finite")
        elif self.pairs:
            raise InvalidArgumentError("Only deflated views carry deflation pairs")

    @property
    def kernel(self) -> BaseKernel:
        """The underlying kernel object"""
        return self.base if isinstance(self.base, BaseKernel) else self.base.kernel

    @property
    def domain(self):
        return self.kernel.domain

    def adjoint(self) -> "KernelView":
        if self.mode == ViewMode.PLAIN:
            return KernelView(self.base, ViewMode.ADJOINT)
        if self.mode == ViewMode.ADJOINT:
            return as_view(self.base)
        # conj(p(s, x, y)) = conj(q(s, x, y)) - sum_j f_j(x, y) * conj(g_j(s, y))
        return KernelView(as_view(self.base).adjoint(), ViewMode.DEFLATED, tuple((g, f) for f, g in self.pairs))

    def deflate(self, pairs: Sequence[Tuple[FiberFunction, FiberFunction]]) -> "KernelView":
        return KernelView(self, ViewMode.DEFLATED, tuple(pairs))

    def evaluate(self, x, s, y) -> np.ndarray:
        """Pointwise evaluation on broadcastable (..., dim) point arrays"""
        if self.mode == ViewMode.PLAIN:
            return np.asarray(self.kernel.evaluate(x, s, y), dtype=complex)
        inner = as_view(self.base)
        if self.mode == ViewMode.ADJOINT:
            return np.conj(inner.evaluate(s, x, y))
        value = inner.evaluate(x, s, y)
        for f, g in self.pairs:
            value = value - np.conj(f.at(s, y)) * g.at(x, y)
        return value

    def fiber_samples(self, grid: QuadratureGrid, alpha) -> np.ndarray:
        """K[i, j] = kernel(x_i, x_j, alpha) for this view"""
        if self.mode == ViewMode.PLAIN:
            return self.kernel.fiber_samples(grid, alpha)
        inner = as_view(self.base).fiber_samples(grid, alpha)
        if self.mode == ViewMode.ADJOINT:
            return np.conj(inner.T)
        samples = np.array(inner, dtype=complex)
        for f, g in self.pairs:
            if not f.grid.same_as(grid):
                raise InvalidArgumentError("Deflation pairs live on a different quadrature grid")
            k = int(f.fiber_grid.locate(alpha))
            samples -= np.outer(g.fiber(k), np.conj(f.fiber(k)))
        return samples


def as_view(kernel) -> KernelView:
    if isinstance(kernel, KernelView):
        return kernel
    if isinstance(kernel, BaseKernel):
        return KernelView(kernel)
    raise InvalidArgumentError(f"Expected a kernel or kernel view, got {type(kernel).__name__}")


def eval_kernel(view, x, s, y) -> complex:
    """Evaluate a view at single points x, s, y in Omega"""
    view = as_view(view)
    domain = view.domain
    points = []
    for name, p in (("x", x), ("s", s), ("y", y)):
        arr = domain.as_points(p)
        domain.check_contains(arr, name)
        points.append(arr)
    value = view.evaluate(*points)
    if not np.all(np.isfinite(value)):
        raise EvaluationError(f"Kernel is not finite at x={x}, s={s}, y={y}")
    return complex(value) if np.ndim(value) == 0 else value


def bound_function(kernel, grid: QuadratureGrid, fiber_grid: QuadratureGrid = None) -> Tuple[L0Scalar, float]:
    """b(t) = integral integral |q(x, s, t)|^2 dx ds on every fiber node, and its maximum"""
    view = as_view(kernel)
    fiber_grid = fiber_grid or build_fiber_grid(grid)
    w = grid.weights
    values = np.empty(fiber_grid.size)
    for k, alpha in enumerate(fiber_grid.nodes):
        samples = view.fiber_samples(grid, alpha)
        if not np.all(np.isfinite(samples)):
            raise EvaluationError(f"Non-finite kernel sample on fiber alpha={alpha}")
        values[k] = w @ (np.abs(samples) ** 2) @ w
    sup = float(values.max())
    logger.debug("Bound function sup = %.6g over %d fibers", sup, fiber_grid.size)
    return L0Scalar(values, fiber_grid), sup


def operator_norm_bound(kernel, grid: QuadratureGrid, fiber_grid: QuadratureGrid = None) -> float:
    """C0 with ||Sf|| <= C0 ||f|| on L2(Omega^2), on the square-integrable fiber bound"""
    _, sup = bound_function(kernel, grid, fiber_grid)
    return float(np.sqrt(sup))
