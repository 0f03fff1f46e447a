"""JSON problem files.

    {
      "domain": [0, 1], "nu": 1,
      "grid": {"rule": "gauss", "n": 16, "fiber_n": 21},
      "kernel": {"builtin": "constant", "value": 1},
      "g0": {"terms": [{"x": "t"}, {"coef": -0.5}]},
      "kappa": 0.5,
      "tolerances": {"tau": 0.05}
    }

"kernel" takes one of {"builtin": name, **params}, {"finite_rank": [...]}
or {"sampled": path}. "g0" is a sum of factors coef * x_basis(x) *
y_basis(y), or {"sampled": path} pointing at a tensor file of shape
(N_x, N_y, 1). Relative paths resolve against the problem file's
directory. "kappa" and "kappa_search" are mutually exclusive.
"""
import dataclasses
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Optional, Tuple

from core.errors import InvalidArgumentError, PIEError, ProblemParseError, ProblemValidationError
from core.fredholm_series import SeriesConfig
from core.functions import FiberFunction
from core.grid import MAX_DIMENSION, Domain, QuadratureGrid, QuadratureRule, build_fiber_grid, build_grid
from core.solver import SearchRegion, Thresholds, min_fiber_nodes
from kernels.base_kernel import BaseKernel
from kernels.basis import complex_to_spec, parse_complex, parse_factor
from kernels.catalog import build_kernel
from kernels.sampled_kernel import read_tensor

logger = logging.getLogger(__name__)

TOP_LEVEL_FIELDS = {"domain", "nu", "grid", "kernel", "g0", "kappa", "kappa_search", "tolerances"}
GRID_FIELDS = {"rule", "n", "fiber_n"}
THRESHOLD_FIELDS = {"regularity", "rank", "tau", "solvability", "cluster", "residual"}
SERIES_FIELDS = {"max_order", "tail_tol", "coefficient_method"}


@dataclass(frozen=True)
class ProblemFile:
    domain: Domain
    rule: QuadratureRule
    n: int
    fiber_n: int
    kernel: dict
    g0: Optional[dict] = None
    kappa: Optional[complex] = None
    kappa_search: Optional[SearchRegion] = None
    thresholds: Thresholds = field(default_factory=Thresholds)
    series: SeriesConfig = field(default_factory=SeriesConfig)
    base_dir: str = field(default=".", compare=False)

    def with_overrides(self, fibers: int = None, tol_solve: float = None, tau: float = None,
                       workers: int = None) -> "ProblemFile":
        """CLI flags win over the file's values"""
        thresholds = self.thresholds.with_overrides(
            solvability=tol_solve, residual=tol_solve, tau=tau, workers=workers
        )
        fiber_n = fibers or self.fiber_n
        _check_fiber_resolution(fiber_n, self.domain.dim, thresholds.tau, "--fibers")
        return dataclasses.replace(self, fiber_n=fiber_n, thresholds=thresholds)

    def build_grids(self) -> Tuple[QuadratureGrid, QuadratureGrid]:
        grid = build_grid(self.domain, self.rule, self.n)
        return grid, build_fiber_grid(grid, self.fiber_n)

    def build_kernel(self, grid: QuadratureGrid, fiber_grid: QuadratureGrid) -> BaseKernel:
        return build_kernel(self.kernel, self.domain, grid, fiber_grid, self.base_dir)

    def build_g0(self, grid: QuadratureGrid, fiber_grid: QuadratureGrid) -> Optional[FiberFunction]:
        if self.g0 is None:
            return None
        if "sampled" in self.g0:
            path = self.g0["sampled"]
            if not os.path.isabs(path):
                path = os.path.join(self.base_dir, path)
            values = read_tensor(path)
            expected = (grid.size, fiber_grid.size, 1)
            if values.shape != expected:
                raise InvalidArgumentError(f"Sampled g0 has shape {values.shape}, grid needs {expected}")
            return FiberFunction(values[:, :, 0], grid, fiber_grid)

        factors = [parse_factor(term) for term in self.g0["terms"]]

        def g0(x, y):
            if self.domain.dim == 1:
                x, y = x[..., None], y[..., None]
            return sum(f.evaluate(x, y, self.domain) for f in factors)

        return FiberFunction.from_callable(g0, grid, fiber_grid)


def _check_fiber_resolution(fiber_n: int, nu: int, tau: float, name: str):
    """One fiber node must stay below the tau fraction that counts as positive measure"""
    needed = min_fiber_nodes(tau, nu)
    if fiber_n < needed:
        raise ProblemValidationError(name, f"tau={tau} needs at least {needed} fiber nodes per axis, got {fiber_n}")


def _require_fields(spec: dict, allowed: set, where: str):
    unknown = set(spec) - allowed
    if unknown:
        name = sorted(unknown)[0]
        raise ProblemValidationError(f"{where}{name}" if where else name, "unknown field")


def _kappa(value, name: str) -> complex:
    try:
        return parse_complex(value, name)
    except InvalidArgumentError as e:
        raise ProblemValidationError(name, str(e))


def _normalize_g0(spec) -> dict:
    if not isinstance(spec, dict):
        raise ProblemValidationError("g0", "expected an object")
    if set(spec) == {"sampled"}:
        if not isinstance(spec["sampled"], str):
            raise ProblemValidationError("g0.sampled", "expected a file path")
        return dict(spec)
    _require_fields(spec, {"terms"}, "g0.")
    terms = spec.get("terms")
    if not isinstance(terms, list) or not terms:
        raise ProblemValidationError("g0.terms", "expected a non-empty list of factors")
    try:
        return {"terms": [parse_factor(term).to_spec() for term in terms]}
    except InvalidArgumentError as e:
        raise ProblemValidationError("g0.terms", str(e))


def problem_from_dict(data, base_dir: str = ".") -> ProblemFile:
    if not isinstance(data, dict):
        raise ProblemValidationError("problem", "expected a JSON object")
    _require_fields(data, TOP_LEVEL_FIELDS, "")
    for required in ("domain", "grid", "kernel"):
        if required not in data:
            raise ProblemValidationError(required, "required field is missing")

    bounds = data["domain"]
    if not isinstance(bounds, list) or len(bounds) != 2:
        raise ProblemValidationError("domain", "expected [a, b]")
    nu = data.get("nu", 1)
    if not isinstance(nu, int) or isinstance(nu, bool) or not 1 <= nu <= MAX_DIMENSION:
        raise ProblemValidationError("nu", f"expected an integer in 1..{MAX_DIMENSION}, got {nu!r}")
    try:
        domain = Domain(float(bounds[0]), float(bounds[1]), nu)
    except (InvalidArgumentError, TypeError, ValueError) as e:
        raise ProblemValidationError("domain", str(e))

    grid_spec = data["grid"]
    if not isinstance(grid_spec, dict):
        raise ProblemValidationError("grid", "expected an object")
    _require_fields(grid_spec, GRID_FIELDS, "grid.")
    try:
        rule = QuadratureRule.parse(grid_spec.get("rule", "gauss"))
    except InvalidArgumentError as e:
        raise ProblemValidationError("grid.rule", str(e))
    n = grid_spec.get("n")
    if not isinstance(n, int) or isinstance(n, bool):
        raise ProblemValidationError("grid.n", "expected an integer")
    fiber_n = grid_spec.get("fiber_n")
    if fiber_n is not None and (not isinstance(fiber_n, int) or isinstance(fiber_n, bool)):
        raise ProblemValidationError("grid.fiber_n", "expected an integer")

    if "kappa" in data and "kappa_search" in data:
        raise ProblemValidationError("kappa_search", "'kappa' and 'kappa_search' are mutually exclusive")
    kappa = _kappa(data["kappa"], "kappa") if "kappa" in data else None
    kappa_search = None
    if "kappa_search" in data:
        try:
            kappa_search = SearchRegion.from_spec(data["kappa_search"])
        except (InvalidArgumentError, TypeError, ValueError) as e:
            raise ProblemValidationError("kappa_search", str(e))

    tolerances = data.get("tolerances", {})
    if not isinstance(tolerances, dict):
        raise ProblemValidationError("tolerances", "expected an object")
    _require_fields(tolerances, THRESHOLD_FIELDS | SERIES_FIELDS, "tolerances.")
    try:
        thresholds = Thresholds(**{k: v for k, v in tolerances.items() if k in THRESHOLD_FIELDS})
        series = SeriesConfig(**{k: v for k, v in tolerances.items() if k in SERIES_FIELDS})
    except (InvalidArgumentError, TypeError) as e:
        raise ProblemValidationError("tolerances", str(e))

    if fiber_n is None:
        fiber_n = max(n, min_fiber_nodes(thresholds.tau, nu))
    _check_fiber_resolution(fiber_n, nu, thresholds.tau, "grid.fiber_n")

    g0 = _normalize_g0(data["g0"]) if data.get("g0") is not None else None

    problem = ProblemFile(
        domain=domain, rule=rule, n=n, fiber_n=fiber_n, kernel=data["kernel"], g0=g0,
        kappa=kappa, kappa_search=kappa_search, thresholds=thresholds, series=series, base_dir=base_dir,
    )
    try:
        grid, fiber_grid = problem.build_grids()
    except PIEError as e:
        raise ProblemValidationError("grid", str(e))
    try:
        kernel = problem.build_kernel(grid, fiber_grid)
    except (PIEError, TypeError, OSError) as e:
        raise ProblemValidationError("kernel", str(e))
    if "sampled" not in problem.kernel:
        problem = dataclasses.replace(problem, kernel=kernel.to_spec())
    try:
        problem.build_g0(grid, fiber_grid)
    except (PIEError, OSError) as e:
        raise ProblemValidationError("g0", str(e))
    return problem


def parse_problem(path) -> ProblemFile:
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except (OSError, UnicodeDecodeError) as e:
        raise ProblemParseError(f"Cannot read problem file {path}: {e}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ProblemParseError(f"Malformed JSON in {path}: {e.msg}", e.lineno, e.colno)
    problem = problem_from_dict(data, os.path.dirname(os.path.abspath(path)))
    logger.debug("Parsed problem %s: %s", path, serialize_problem(problem))
    return problem


def serialize_problem(problem: ProblemFile) -> dict:
    """Problem as a problem-file dict with every default filled in"""
    data = {
        "domain": [problem.domain.lower, problem.domain.upper],
        "nu": problem.domain.dim,
        "grid": {"rule": problem.rule.value, "n": problem.n, "fiber_n": problem.fiber_n},
        "kernel": problem.kernel,
    }
    if problem.g0 is not None:
        data["g0"] = problem.g0
    if problem.kappa is not None:
        data["kappa"] = complex_to_spec(problem.kappa)
    if problem.kappa_search is not None:
        data["kappa_search"] = problem.kappa_search.to_spec()
    tolerances = {name: getattr(problem.thresholds, name) for name in sorted(THRESHOLD_FIELDS)}
    tolerances["max_order"] = problem.series.max_order
    tolerances["tail_tol"] = problem.series.tail_tol
    tolerances["coefficient_method"] = problem.series.coefficient_method.value
    data["tolerances"] = tolerances
    return data


def write_problem(problem: ProblemFile, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(serialize_problem(problem), f, indent=2)
