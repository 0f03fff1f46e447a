import numpy as np
import pytest

from core.errors import DomainError, EvaluationError, InterpolationUnsupportedError, InvalidArgumentError
from core.functions import FiberFunction
from core.grid import build_grid
from core.kernel_model import ViewMode, as_view, bound_function, eval_kernel, operator_norm_bound
from kernels.catalog import build_kernel, load_kernels
from kernels.polynomial_kernel import PolynomialKernel
from kernels.sampled_kernel import SampledKernel, read_tensor, write_tensor


def random_function(rng, grid, fiber_grid):
    values = rng.normal(size=(grid.size, fiber_grid.size)) + 1j * rng.normal(size=(grid.size, fiber_grid.size))
    return FiberFunction(values, grid, fiber_grid)


def test_plain_constant_kernel(constant_kernel):
    assert eval_kernel(constant_kernel, 0.1, 0.7, 0.3) == 1


def test_adjoint_conjugates_and_swaps(unit_domain):
    kernel = PolynomialKernel(unit_domain, p=1, r=2, coef=1j)     # i * x * s^2
    adjoint = as_view(kernel).adjoint()
    assert adjoint.mode == ViewMode.ADJOINT
    assert eval_kernel(adjoint, 0.2, 0.5, 0.9) == pytest.approx(-1j * 0.5 * 0.2 ** 2)


def test_adjoint_of_symmetric_imaginary_kernel(unit_domain):
    kernel = PolynomialKernel(unit_domain, p=1, r=1, coef=1j)
    assert eval_kernel(as_view(kernel).adjoint(), 0.3, 0.6, 0.1) == pytest.approx(-1j * 0.18)


def test_deflation_of_constant_kernel_vanishes(constant_kernel, grid, fiber_grid):
    one = FiberFunction(np.ones((grid.size, fiber_grid.size)), grid, fiber_grid)
    view = as_view(constant_kernel).deflate([(one, one)])
    x, s, y = grid.nodes[2], grid.nodes[9], fiber_grid.nodes[4]
    assert eval_kernel(view, x, s, y) == pytest.approx(0.0, abs=1e-15)
    np.testing.assert_allclose(view.fiber_samples(grid, fiber_grid.nodes[4]), 0.0, atol=1e-15)


def test_adjoint_is_an_involution(bump_kernel, grid, fiber_grid):
    view = as_view(bump_kernel)
    twice = view.adjoint().adjoint()
    for alpha in fiber_grid.nodes[::4]:
        np.testing.assert_array_equal(twice.fiber_samples(grid, alpha), view.fiber_samples(grid, alpha))


def test_deflation_is_linear_in_pairs(xs_kernel, grid, fiber_grid, rng):
    f1, g1, f2, g2 = (random_function(rng, grid, fiber_grid) for _ in range(4))
    view = as_view(xs_kernel)
    one_pair = view.deflate([(f1, g1)])
    two_pairs = view.deflate([(f1, g1), (f2, g2)])
    for k in (0, 8, 16):
        alpha = fiber_grid.nodes[k]
        expected = one_pair.fiber_samples(grid, alpha) - np.outer(g2.fiber(k), np.conj(f2.fiber(k)))
        np.testing.assert_allclose(two_pairs.fiber_samples(grid, alpha), expected, atol=1e-14)


def test_adjoint_of_deflated_view_swaps_pairs(y_kernel, grid, fiber_grid, rng):
    f, g = random_function(rng, grid, fiber_grid), random_function(rng, grid, fiber_grid)
    deflated = as_view(y_kernel).deflate([(f, g)])
    for alpha in fiber_grid.nodes[::5]:
        np.testing.assert_allclose(
            deflated.adjoint().fiber_samples(grid, alpha),
            np.conj(deflated.fiber_samples(grid, alpha).T),
            atol=1e-14,
        )


def test_finite_rank_matches_sampled(two_term_kernel, grid, fiber_grid):
    sampled = SampledKernel.from_kernel(two_term_kernel, grid, fiber_grid)
    for alpha in fiber_grid.nodes:
        np.testing.assert_allclose(
            sampled.fiber_samples(grid, alpha), two_term_kernel.fiber_samples(grid, alpha), atol=1e-14
        )
    x, s, y = grid.nodes[1], grid.nodes[5], fiber_grid.nodes[3]
    assert abs(eval_kernel(sampled, x, s, y) - eval_kernel(two_term_kernel, x, s, y)) <= 1e-14


def test_sampled_kernel_is_grid_only(two_term_kernel, grid, fiber_grid):
    sampled = SampledKernel.from_kernel(two_term_kernel, grid, fiber_grid)
    with pytest.raises(InterpolationUnsupportedError):
        eval_kernel(sampled, 0.123456, grid.nodes[0], fiber_grid.nodes[0])


def test_tensor_file_round_trip(tmp_path, rng):
    values = rng.normal(size=(3, 3, 2)) + 1j * rng.normal(size=(3, 3, 2))
    path = tmp_path / "kernel.bin"
    write_tensor(path, values)
    raw = path.read_bytes()
    assert np.frombuffer(raw[:24], dtype="<i8").tolist() == [3, 3, 2]
    np.testing.assert_array_equal(read_tensor(path), values)


def test_points_outside_domain(constant_kernel):
    with pytest.raises(DomainError):
        eval_kernel(constant_kernel, 1.5, 0.5, 0.5)


@pytest.mark.parametrize("kernel_name, expected", [
    ("constant_kernel", lambda t: np.ones_like(t)),
    ("y_kernel", lambda t: t ** 2),
    ("xs_kernel", lambda t: np.full_like(t, 1 / 9)),
])
def test_bound_function_examples(request, kernel_name, expected, grid, fiber_grid):
    kernel = request.getfixturevalue(kernel_name)
    profile, sup = bound_function(kernel, grid, fiber_grid)
    t = fiber_grid.nodes[:, 0]
    np.testing.assert_allclose(profile.values.real, expected(t), atol=1e-13)
    assert sup == pytest.approx(float(np.max(expected(t))), abs=1e-13)


def test_bound_function_of_constant_kernel_is_exact(constant_kernel, grid, fiber_grid):
    _, sup = bound_function(constant_kernel, grid, fiber_grid)
    assert abs(sup - 1.0) <= 1e-12
    assert operator_norm_bound(constant_kernel, grid, fiber_grid) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("name", ["constant", "polynomial", "gaussian_bump"])
def test_builtin_bound_functions_are_finite(name, unit_domain, grid, fiber_grid):
    kernel = build_kernel({"builtin": name}, unit_domain)
    _, sup = bound_function(kernel, grid, fiber_grid)
    assert np.isfinite(sup)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_kernel_raises(unit_domain, grid):
    kernel = PolynomialKernel(unit_domain, t=-1)     # 1 / y, infinite on the fiber y = 0
    fibers = build_grid(unit_domain, "trapezoid", 5)
    with pytest.raises(EvaluationError):
        bound_function(kernel, grid, fibers)


def test_catalog_discovers_builtin_kernels():
    catalog = load_kernels()
    assert {"constant", "polynomial", "gaussian_bump", "finite_rank", "sampled"} <= set(catalog)
    for kernel_class in catalog.values():
        assert kernel_class.description


def test_build_kernel_specs(unit_domain):
    kernel = build_kernel({"builtin": "constant", "value": [0.0, 2.0]}, unit_domain)
    assert kernel.value == 2j
    rank2 = build_kernel({"finite_rank": [{"a": "one", "b": "one"}, {"a": "legendre-1", "b": "legendre-1"}]},
                         unit_domain)
    assert rank2.rank == 2
    with pytest.raises(InvalidArgumentError):
        build_kernel({"builtin": "nonexistent"}, unit_domain)
    with pytest.raises(InvalidArgumentError):
        build_kernel({"builtin": "constant", "colour": 1}, unit_domain)
    with pytest.raises(InvalidArgumentError):
        build_kernel({"builtin": "constant", "finite_rank": []}, unit_domain)
