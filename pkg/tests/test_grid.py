import numpy as np
import pytest

from core.errors import (
    DomainError,
    InterpolationUnsupportedError,
    InvalidArgumentError,
    UnsupportedDimensionError,
)
from core.grid import Domain, QuadratureRule, build_fiber_grid, build_grid, integrate


def test_trapezoid_three_points(unit_domain):
    grid = build_grid(unit_domain, "trapezoid", 3)
    np.testing.assert_allclose(grid.nodes[:, 0], [0.0, 0.5, 1.0])
    np.testing.assert_allclose(grid.weights, [0.25, 0.5, 0.25])


def test_gauss_two_points(unit_domain):
    grid = build_grid(unit_domain, "gauss-legendre", 2)
    np.testing.assert_allclose(grid.nodes[:, 0], [0.5 - 0.5 / np.sqrt(3), 0.5 + 0.5 / np.sqrt(3)], atol=1e-15)
    np.testing.assert_allclose(grid.weights, [0.5, 0.5])


def test_tensor_grid_in_two_dimensions():
    grid = build_grid(Domain(0.0, 1.0, 2), "trapezoid", 3)
    assert grid.nodes.shape == (9, 2)
    assert grid.weights.sum() == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("rule", ["trapezoid", "gauss-legendre"])
@pytest.mark.parametrize("dim", [1, 2, 3])
@pytest.mark.parametrize("lower, upper", [(0.0, 1.0), (-1.0, 2.0)])
def test_weights_positive_and_sum_to_volume(rule, dim, lower, upper):
    domain = Domain(lower, upper, dim)
    grid = build_grid(domain, rule, 5)
    assert len(grid.weights) == 5 ** dim
    assert np.all(grid.weights > 0)
    assert grid.weights.sum() == pytest.approx(domain.volume, rel=1e-12)


def test_aliases_parse():
    assert QuadratureRule.parse("gauss") is QuadratureRule.GAUSS_LEGENDRE
    assert QuadratureRule.parse("trap") is QuadratureRule.TRAPEZOID
    with pytest.raises(InvalidArgumentError):
        QuadratureRule.parse("simpson")


def test_rejects_small_n_and_high_dimension(unit_domain):
    with pytest.raises(InvalidArgumentError):
        build_grid(unit_domain, "gauss", 1)
    with pytest.raises(UnsupportedDimensionError):
        build_grid(Domain(0.0, 1.0, 4), "gauss", 2)


def test_domain_validation():
    with pytest.raises(InvalidArgumentError):
        Domain(1.0, 1.0)
    with pytest.raises(InvalidArgumentError):
        Domain(0.0, 1.0, 0)
    with pytest.raises(DomainError):
        Domain(0.0, 1.0).check_contains(np.array([[1.5]]))


def test_integrate_examples(unit_domain):
    gauss = build_grid(unit_domain, "gauss", 2)
    trap = build_grid(unit_domain, "trapezoid", 3)
    assert integrate(gauss, np.ones(2)) == pytest.approx(1.0)
    assert integrate(trap, np.ones(3)) == pytest.approx(1.0)
    assert abs(integrate(gauss, gauss.nodes[:, 0] ** 2) - 1 / 3) <= 1e-15
    assert integrate(trap, trap.nodes[:, 0] ** 2) == pytest.approx(0.375)
    with pytest.raises(InvalidArgumentError):
        integrate(gauss, np.ones(3))


@pytest.mark.parametrize("n", [2, 4, 8, 16])
def test_gauss_exact_up_to_degree_2n_minus_1(unit_domain, n):
    grid = build_grid(unit_domain, "gauss", n)
    t = grid.nodes[:, 0]
    for degree in range(2 * n):
        exact = 1 / (degree + 1)
        assert abs(integrate(grid, t ** degree) - exact) <= 1e-13 * exact


def test_refinement_converges_for_smooth_integrand(unit_domain):
    exact = 1 - np.cos(1.0)
    errors = []
    for n in (8, 16, 32, 64):
        grid = build_grid(unit_domain, "trapezoid", n)
        errors.append(abs(integrate(grid, np.sin(grid.nodes[:, 0])) - exact))
    assert all(later < earlier for earlier, later in zip(errors, errors[1:]))


def test_locate_nodes_only(grid):
    idx = grid.locate(grid.nodes[[3, 7], 0])
    np.testing.assert_array_equal(idx, [3, 7])
    with pytest.raises(InterpolationUnsupportedError):
        grid.locate(0.123456)


def test_fiber_grid_defaults_to_quadrature_rule(grid):
    fibers = build_fiber_grid(grid)
    assert fibers.same_as(grid)
    assert build_fiber_grid(grid, 33).size == 33


def test_build_is_deterministic(unit_domain):
    a = build_grid(unit_domain, "gauss", 12)
    b = build_grid(unit_domain, "gauss", 12)
    np.testing.assert_array_equal(a.nodes, b.nodes)
    np.testing.assert_array_equal(a.weights, b.weights)
