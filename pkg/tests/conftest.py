import numpy as np
import pytest

from core.functions import FiberFunction
from core.grid import Domain, build_fiber_grid, build_grid
from kernels.constant_kernel import ConstantKernel
from kernels.finite_rank_kernel import FiniteRankKernel
from kernels.gaussian_bump_kernel import GaussianBumpKernel
from kernels.polynomial_kernel import PolynomialKernel


@pytest.fixture
def unit_domain():
    return Domain(0.0, 1.0)


@pytest.fixture
def grid(unit_domain):
    return build_grid(unit_domain, "gauss-legendre", 16)


@pytest.fixture
def fiber_grid(grid):
    # odd Gauss rule, so alpha = 1/2 is a node; one node in 33 stays below tau = 0.05
    return build_fiber_grid(grid, 33)


@pytest.fixture
def constant_kernel(unit_domain):
    """q = 1"""
    return ConstantKernel(unit_domain, 1.0)


@pytest.fixture
def xs_kernel(unit_domain):
    """q = x * s"""
    return PolynomialKernel(unit_domain, p=1, r=1)


@pytest.fixture
def y_kernel(unit_domain):
    """q = y"""
    return PolynomialKernel(unit_domain, t=1)


@pytest.fixture
def two_term_kernel(unit_domain):
    """q = 1*1 + P1(x) P1(s) with the shifted Legendre P1 = 2t - 1; G = diag(1, 1/3)"""
    return FiniteRankKernel(unit_domain, [("one", "one"), ("legendre-1", "legendre-1")])


@pytest.fixture
def bump_kernel(unit_domain):
    return GaussianBumpKernel(unit_domain, amplitude=1.0, width=0.4)


def sample(func, grid, fiber_grid):
    """FiberFunction of func(x, y) with scalar-as-array arguments"""
    return FiberFunction.from_callable(func, grid, fiber_grid)


@pytest.fixture
def make_function(grid, fiber_grid):
    def make(func):
        return sample(func, grid, fiber_grid)
    return make


@pytest.fixture
def rng():
    return np.random.default_rng(20240521)
