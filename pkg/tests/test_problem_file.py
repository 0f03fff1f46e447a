import json

import numpy as np
import pytest

from core.errors import ProblemParseError, ProblemValidationError
from core.grid import QuadratureRule
from core.problem_file import parse_problem, problem_from_dict, serialize_problem, write_problem
from kernels.sampled_kernel import write_tensor

MINIMAL = {"domain": [0, 1], "grid": {"n": 8}, "kernel": {"builtin": "constant"}}


def with_fields(**fields):
    return {**MINIMAL, **fields}


def test_minimal_problem_uses_defaults():
    problem = problem_from_dict(MINIMAL)
    assert problem.rule == QuadratureRule.GAUSS_LEGENDRE
    assert problem.fiber_n == 21
    assert problem.kernel == {"builtin": "constant", "value": 1.0}
    assert problem.kappa is None and problem.g0 is None
    assert problem.thresholds.tau == 0.05


def test_g0_terms_are_built_on_the_grid():
    problem = problem_from_dict(with_fields(g0={"terms": [{"x": "t"}, {"coef": -0.5}]}))
    grid, fibers = problem.build_grids()
    g0 = problem.build_g0(grid, fibers)
    np.testing.assert_allclose(g0.values, np.repeat(grid.nodes - 0.5, fibers.size, axis=1), atol=1e-15)


def test_sampled_g0(tmp_path):
    values = np.arange(8 * 21, dtype=complex).reshape(8, 21, 1) * (1 + 1j)
    write_tensor(tmp_path / "g0.bin", values)
    problem = problem_from_dict(with_fields(g0={"sampled": "g0.bin"}), str(tmp_path))
    g0 = problem.build_g0(*problem.build_grids())
    np.testing.assert_array_equal(g0.values, values[:, :, 0])


def test_sampled_g0_with_wrong_shape(tmp_path):
    write_tensor(tmp_path / "g0.bin", np.zeros((3, 3, 1), dtype=complex))
    with pytest.raises(ProblemValidationError) as info:
        problem_from_dict(with_fields(g0={"sampled": "g0.bin"}), str(tmp_path))
    assert info.value.field == "g0"


@pytest.mark.parametrize("data, field", [
    (with_fields(kappa=1, kappa_search={"re": [0, 2]}), "kappa_search"),
    (with_fields(colour="blue"), "colour"),
    (with_fields(grid={"n": 8, "m": 3}), "grid.m"),
    (with_fields(tolerances={"tau": 0.1, "speed": 2}), "tolerances.speed"),
    (with_fields(tolerances={"tau": 2}), "tolerances"),
    (with_fields(nu=4), "nu"),
    (with_fields(nu=True), "nu"),
    (with_fields(grid={"n": 1}), "grid"),
    (with_fields(grid={"n": 8, "fiber_n": 9}), "grid.fiber_n"),
    (with_fields(grid={"n": 8, "fiber_n": 20}), "grid.fiber_n"),
    (with_fields(grid={"n": "eight"}), "grid.n"),
    (with_fields(kernel={"builtin": "nonexistent"}), "kernel"),
    (with_fields(kappa="one"), "kappa"),
    (with_fields(g0={"terms": []}), "g0.terms"),
    ({"domain": [0, 1], "grid": {"n": 8}}, "kernel"),
])
def test_validation_errors_name_the_field(data, field):
    with pytest.raises(ProblemValidationError) as info:
        problem_from_dict(data)
    assert info.value.field == field


def test_parse_error_reports_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "domain": [0, 1],\n  oops\n}\n')
    with pytest.raises(ProblemParseError) as info:
        parse_problem(path)
    assert info.value.line == 3
    assert info.value.column == 3


def test_missing_file_is_a_parse_error(tmp_path):
    with pytest.raises(ProblemParseError):
        parse_problem(tmp_path / "nowhere.json")


def test_write_and_parse_round_trip(tmp_path):
    problem = problem_from_dict(with_fields(
        kernel={"finite_rank": [{"a": "one", "b": "one"}, {"a": {"x": "legendre-1"}, "b": {"x": "legendre-1"}}]},
        g0={"terms": [{"x": "sin", "y": "t", "coef": [1, 2]}]},
        kappa=[0.5, -0.25],
        tolerances={"tau": 0.1, "max_order": 3, "coefficient_method": "tensor-quadrature"},
    ))
    path = tmp_path / "problem.json"
    write_problem(problem, path)
    assert parse_problem(path) == problem
    assert json.loads(path.read_text()) == serialize_problem(problem)


def test_serialized_problem_fills_defaults():
    data = serialize_problem(problem_from_dict(with_fields(kappa_search={"re": [0, 2]})))
    assert data["kappa_search"] == {"re": [0.0, 2.0], "im": [0.0, 0.0]}
    assert data["tolerances"]["cluster"] == 1e-6
    assert data["tolerances"]["coefficient_method"] == "trace-recursion"
    assert "workers" not in data["tolerances"]


def test_overrides_from_flags():
    problem = problem_from_dict(MINIMAL).with_overrides(fibers=25, tol_solve=1e-6, tau=None, workers=3)
    assert problem.fiber_n == 25
    assert problem.thresholds.solvability == problem.thresholds.residual == 1e-6
    assert problem.thresholds.tau == 0.05
    assert problem.thresholds.workers == 3


def test_default_fiber_count_follows_tau():
    assert problem_from_dict(with_fields(grid={"n": 40})).fiber_n == 40
    assert problem_from_dict(with_fields(tolerances={"tau": 0.2})).fiber_n == 8
    assert problem_from_dict(with_fields(tolerances={"tau": 0.01})).fiber_n == 101
    assert problem_from_dict(with_fields(nu=2, grid={"n": 4})).fiber_n == 5


def test_flags_cannot_make_single_fibers_count_as_positive_measure():
    problem = problem_from_dict(MINIMAL)
    for overrides in ({"fibers": 11}, {"tau": 0.01}, {"fibers": 21, "tau": 0.01}):
        with pytest.raises(ProblemValidationError) as info:
            problem.with_overrides(**overrides)
        assert info.value.field == "--fibers"
    assert problem.with_overrides(fibers=101, tau=0.01).fiber_n == 101
