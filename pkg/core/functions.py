"""Sampled function spaces.

FiberFunction is a function f(x, y) sampled on x-nodes times fiber nodes,
L0Scalar a function b(y) of the fiber variable only, and NablaMask a set of
fiber nodes (the grid stand-in for an idempotent of L0).
"""
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from core.errors import InvalidArgumentError
from core.grid import QuadratureGrid


def _frozen(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class L0Scalar:
    values: np.ndarray = field(repr=False)
    fiber_grid: QuadratureGrid

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, complex))
        if self.values.shape != (self.fiber_grid.size,):
            raise InvalidArgumentError(
                f"L0Scalar needs {self.fiber_grid.size} values, got shape {self.values.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise InvalidArgumentError("L0Scalar values must be finite")

    @classmethod
    def from_callable(cls, func: Callable, fiber_grid: QuadratureGrid) -> "L0Scalar":
        y = fiber_grid.nodes if fiber_grid.domain.dim > 1 else fiber_grid.nodes[:, 0]
        values = np.broadcast_to(np.asarray(func(y), dtype=complex), (fiber_grid.size,))
        return cls(values, fiber_grid)

    @classmethod
    def constant(cls, value: complex, fiber_grid: QuadratureGrid) -> "L0Scalar":
        return cls(np.full(fiber_grid.size, value, dtype=complex), fiber_grid)

    def max_abs(self) -> float:
        return float(np.abs(self.values).max()) if self.values.size else 0.0

    def norm(self) -> float:
        """sqrt(integral |b(t)|^2 dt)"""
        return float(np.sqrt(np.dot(self.fiber_grid.weights, np.abs(self.values) ** 2)))


@dataclass(frozen=True, eq=False)
class NablaMask:
    flags: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "flags", _frozen(self.flags, bool))

    @classmethod
    def full(cls, size: int) -> "NablaMask":
        return cls(np.ones(size, dtype=bool))

    @classmethod
    def empty(cls, size: int) -> "NablaMask":
        return cls(np.zeros(size, dtype=bool))

    @property
    def count(self) -> int:
        return int(self.flags.sum())

    @property
    def fraction(self) -> float:
        return self.count / len(self.flags) if len(self.flags) else 0.0

    def is_empty(self) -> bool:
        return not self.flags.any()

    def is_full(self) -> bool:
        return bool(self.flags.all())

    def indices(self) -> list:
        return [int(i) for i in np.flatnonzero(self.flags)]


@dataclass(frozen=True, eq=False)
class FiberFunction:
    """Samples values[i, k] = f(x_i, alpha_k)"""
    values: np.ndarray = field(repr=False)
    grid: QuadratureGrid
    fiber_grid: QuadratureGrid

    # numpy scalars defer to __rmul__ instead of broadcasting over the object
    __array_ufunc__ = None

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, complex))
        expected = (self.grid.size, self.fiber_grid.size)
        if self.values.shape != expected:
            raise InvalidArgumentError(f"FiberFunction needs shape {expected}, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise InvalidArgumentError("FiberFunction values must be finite")

    @classmethod
    def from_callable(cls, func: Callable, grid: QuadratureGrid, fiber_grid: QuadratureGrid) -> "FiberFunction":
        """Sample func(x, y); for dim 1 the arguments are scalars-as-arrays, else (..., dim) arrays"""
        if grid.domain.dim == 1:
            x = grid.nodes[:, 0][:, None]
            y = fiber_grid.nodes[:, 0][None, :]
        else:
            x = grid.nodes[:, None, :]
            y = fiber_grid.nodes[None, :, :]
        values = np.broadcast_to(np.asarray(func(x, y), dtype=complex), (grid.size, fiber_grid.size))
        return cls(values, grid, fiber_grid)

    @classmethod
    def zeros(cls, grid: QuadratureGrid, fiber_grid: QuadratureGrid) -> "FiberFunction":
        return cls(np.zeros((grid.size, fiber_grid.size), dtype=complex), grid, fiber_grid)

    def check_compatible(self, other):
        fiber_grid = other.fiber_grid
        if not self.fiber_grid.same_as(fiber_grid):
            raise InvalidArgumentError("Functions live on different fiber grids")
        if isinstance(other, FiberFunction) and not self.grid.same_as(other.grid):
            raise InvalidArgumentError("Functions live on different quadrature grids")

    def fiber(self, k: int) -> np.ndarray:
        return self.values[:, k]

    def at(self, x, y) -> np.ndarray:
        """Exact-grid lookup f(x, y) for node-aligned points"""
        return self.values[self.grid.locate(x), self.fiber_grid.locate(y)]

    def norm(self) -> float:
        """Discrete L2(Omega^2) norm, weighted along both axes"""
        density = np.abs(self.values) ** 2
        return float(np.sqrt(self.grid.weights @ density @ self.fiber_grid.weights))

    def __add__(self, other: "FiberFunction") -> "FiberFunction":
        self.check_compatible(other)
        return FiberFunction(self.values + other.values, self.grid, self.fiber_grid)

    def __sub__(self, other: "FiberFunction") -> "FiberFunction":
        self.check_compatible(other)
        return FiberFunction(self.values - other.values, self.grid, self.fiber_grid)

    def __mul__(self, scalar: complex) -> "FiberFunction":
        return FiberFunction(self.values * scalar, self.grid, self.fiber_grid)

    __rmul__ = __mul__

    def __neg__(self) -> "FiberFunction":
        return FiberFunction(-self.values, self.grid, self.fiber_grid)
