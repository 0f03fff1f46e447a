import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from core.errors import DomainError, InterpolationUnsupportedError, InvalidArgumentError, UnsupportedDimensionError

logger = logging.getLogger(__name__)

MAX_DIMENSION = 3
# Relative tolerance for matching a query point against grid nodes
NODE_MATCH_TOL = 1e-12


class QuadratureRule(Enum):
    TRAPEZOID = "trapezoid"
    GAUSS_LEGENDRE = "gauss-legendre"

    @classmethod
    def parse(cls, value) -> "QuadratureRule":
        if isinstance(value, cls):
            return value
        aliases = {"gauss": cls.GAUSS_LEGENDRE, "trap": cls.TRAPEZOID}
        if value in aliases:
            return aliases[value]
        try:
            return cls(value)
        except ValueError:
            raise InvalidArgumentError(f"Unknown quadrature rule '{value}'")


@dataclass(frozen=True)
class Domain:
    """The box [lower, upper]^dim"""
    lower: float
    upper: float
    dim: int = 1

    def __post_init__(self):
        if not np.isfinite(self.lower) or not np.isfinite(self.upper) or not self.lower < self.upper:
            raise InvalidArgumentError(f"Domain needs lower < upper, got [{self.lower}, {self.upper}]")
        if int(self.dim) != self.dim or self.dim < 1:
            raise InvalidArgumentError(f"Domain dimension must be a positive integer, got {self.dim}")

    @property
    def volume(self) -> float:
        return (self.upper - self.lower) ** self.dim

    def as_points(self, points) -> np.ndarray:
        """Coerce scalars / sequences to an array of shape (..., dim)"""
        arr = np.asarray(points, dtype=float)
        if self.dim == 1 and (arr.ndim == 0 or arr.shape[-1] != 1):
            arr = arr[..., None]
        if arr.shape[-1] != self.dim:
            raise InvalidArgumentError(f"Expected points of dimension {self.dim}, got shape {arr.shape}")
        return arr

    def check_contains(self, points: np.ndarray, name: str = "point"):
        span = self.upper - self.lower
        slack = NODE_MATCH_TOL * max(1.0, span)
        if np.any(points < self.lower - slack) or np.any(points > self.upper + slack):
            raise DomainError(f"{name} outside [{self.lower}, {self.upper}]^{self.dim}")


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    domain: Domain
    rule: QuadratureRule
    n: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.weights)

    def same_as(self, other: "QuadratureGrid") -> bool:
        return (
            self is other
            or (self.domain == other.domain and self.rule == other.rule and self.n == other.n)
        )

    def locate(self, points) -> np.ndarray:
        """Map points that coincide with grid nodes to their node indices.

        Grid-aligned data (sampled kernels, fiber functions) has no
        interpolation; any point that is not a node raises.
        """
        pts = self.domain.as_points(points)
        flat = pts.reshape(-1, self.domain.dim)
        distance = np.abs(flat[:, None, :] - self.nodes[None, :, :]).max(axis=-1)
        idx = distance.argmin(axis=1)
        scale = max(1.0, abs(self.domain.lower), abs(self.domain.upper))
        if np.any(distance[np.arange(len(idx)), idx] > NODE_MATCH_TOL * scale):
            raise InterpolationUnsupportedError("Grid-aligned data can only be evaluated at grid nodes")
        return idx.reshape(pts.shape[:-1])


def _rule_1d(rule: QuadratureRule, n: int, lower: float, upper: float):
    if rule == QuadratureRule.TRAPEZOID:
        nodes = np.linspace(lower, upper, n)
        h = (upper - lower) / (n - 1)
        weights = np.full(n, h)
        weights[0] = weights[-1] = h / 2
        return nodes, weights
    t, w = np.polynomial.legendre.leggauss(n)
    half = (upper - lower) / 2
    return half * t + (upper + lower) / 2, half * w


def build_grid(domain: Domain, rule, n: int) -> QuadratureGrid:
    """Tensor-product quadrature grid over domain with n points per axis"""
    rule = QuadratureRule.parse(rule)
    if int(n) != n or n < 2:
        raise InvalidArgumentError(f"Need at least 2 quadrature points per axis, got {n}")
    if domain.dim > MAX_DIMENSION:
        raise UnsupportedDimensionError(
            f"Dimension {domain.dim} not supported (tensor grids grow as n^dim; limit is {MAX_DIMENSION})"
        )
    n = int(n)
    axis_nodes, axis_weights = _rule_1d(rule, n, domain.lower, domain.upper)

    mesh = np.meshgrid(*([axis_nodes] * domain.dim), indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=-1)
    wmesh = np.meshgrid(*([axis_weights] * domain.dim), indexing="ij")
    weights = np.prod(np.stack([m.ravel() for m in wmesh], axis=-1), axis=-1)

    nodes.setflags(write=False)
    weights.setflags(write=False)
    logger.debug("Built %s grid: n=%d dim=%d (%d nodes)", rule.value, n, domain.dim, len(weights))
    return QuadratureGrid(domain=domain, rule=rule, n=n, nodes=nodes, weights=weights)


def build_fiber_grid(grid: QuadratureGrid, fiber_n: int = None, rule=None) -> QuadratureGrid:
    """Grid for the fiber variable y; same rule and resolution as grid unless overridden"""
    return build_grid(grid.domain, rule if rule is not None else grid.rule, fiber_n or grid.n)


def integrate(grid: QuadratureGrid, samples) -> complex:
    values = np.asarray(samples)
    if values.shape != (grid.size,):
        raise InvalidArgumentError(f"Expected {grid.size} samples, got shape {values.shape}")
    return complex(np.dot(grid.weights, values))
