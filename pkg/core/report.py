"""Command dispatch and report assembly for the CLI.

A report is a JSON-ready dict. Everything in it except the "timing" block
is a deterministic function of the problem, whatever the worker count.
"""
import json
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np
import pandas as pd

from core.errors import ProblemValidationError
from core.fiber import assemble, fiber_determinant
from core.fredholm_series import determinant_series, integrability_checks
from core.functions import FiberFunction, L0Scalar, NablaMask
from core.kernel_model import operator_norm_bound
from core.l0_algebra import bessel_bound, nabla_independent
from core.parallel import map_fibers
from core.problem_file import ProblemFile, serialize_problem
from core.solver import (
    Classification,
    ClassificationKind,
    Solvability,
    check_solvability,
    check_solvability_l2,
    classify,
    find_characteristic_numbers,
    null_families,
    solve,
)

logger = logging.getLogger(__name__)

COMMANDS = ("solve", "classify", "det", "nullspace", "check-solvability", "find-characteristic")
EXIT_OK = 0
EXIT_ERROR = 1
EXIT_OBSTRUCTED = 2


@dataclass
class Report:
    data: dict
    exit_code: int = EXIT_OK
    frames: Dict[str, pd.DataFrame] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2)

    def write_csv(self, directory: str):
        os.makedirs(directory, exist_ok=True)
        for name, frame in self.frames.items():
            path = os.path.join(directory, f"{name}.csv")
            frame.to_csv(path, index=False)
            logger.info("Wrote %s (%d rows)", path, len(frame))


def _complex(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def _coordinates(prefix: str, nodes: np.ndarray) -> Dict[str, np.ndarray]:
    if nodes.shape[1] == 1:
        return {prefix: nodes[:, 0]}
    return {f"{prefix}_{d + 1}": nodes[:, d] for d in range(nodes.shape[1])}


def _alpha_list(nodes: np.ndarray) -> list:
    return [float(a[0]) if len(a) == 1 else [float(v) for v in a] for a in nodes]


def det_profile_frame(profile: L0Scalar) -> pd.DataFrame:
    frame = pd.DataFrame(_coordinates("alpha", profile.fiber_grid.nodes))
    frame["Re D1"] = profile.values.real
    frame["Im D1"] = profile.values.imag
    return frame


def solution_frame(f: FiberFunction) -> pd.DataFrame:
    """Long format: one row per (x node, fiber node)"""
    n_x, n_y = f.values.shape
    columns = {}
    for name, column in _coordinates("x", f.grid.nodes).items():
        columns[name] = np.repeat(column, n_y)
    for name, column in _coordinates("alpha", f.fiber_grid.nodes).items():
        columns[name] = np.tile(column, n_x)
    columns["re"] = f.values.real.ravel()
    columns["im"] = f.values.imag.ravel()
    return pd.DataFrame(columns)


def _classification_dict(c: Classification) -> dict:
    det_abs = np.abs(c.det_profile.values)
    return {
        "kappa": _complex(c.kappa),
        "kind": c.kind.value,
        "m": c.m,
        "deficient_fibers": c.mask.count,
        "deficient_fraction": c.mask.fraction,
        "min_abs_det": float(det_abs.min()),
        "max_abs_det": float(det_abs.max()),
    }


def _profile_dict(profile: L0Scalar) -> list:
    return [[alpha, v.real, v.imag] for alpha, v in zip(_alpha_list(profile.fiber_grid.nodes), profile.values)]


def _solvability_dict(s: Solvability) -> dict:
    data = {"verdict": "solvable" if s.solvable else "obstructed", "max_violation": s.max_violation}
    if s.witness is not None:
        data["adjoint_index"] = s.index
        data["witness"] = _profile_dict(s.witness)
    return data


def _require(problem: ProblemFile, command: str, *names):
    for name in names:
        if getattr(problem, name) is None:
            raise ProblemValidationError(name, f"required by '{command}'")


class _Context:
    """Grids, kernel and right-hand side built once per command"""

    def __init__(self, problem: ProblemFile):
        self.problem = problem
        self.thresholds = problem.thresholds
        self.grid, self.fiber_grid = problem.build_grids()
        self.kernel = problem.build_kernel(self.grid, self.fiber_grid)
        self.g0 = problem.build_g0(self.grid, self.fiber_grid)

    def classify(self, progress_callback=None) -> Classification:
        return classify(self.kernel, self.grid, self.problem.kappa, self.thresholds, self.fiber_grid,
                        progress_callback)


def _bessel_m_max(ctx: _Context, kappa0: complex) -> int:
    return bessel_bound(ctx.kernel, ctx.grid, 1 / kappa0, ctx.fiber_grid)[0]


def _run_classify(ctx: _Context, report: Report, progress_callback):
    c = ctx.classify(progress_callback)
    report.data["classification"] = _classification_dict(c)
    if c.kind == ClassificationKind.CHARACTERISTIC:
        report.data["classification"]["bessel_m_max"] = _bessel_m_max(ctx, c.kappa)
    report.data["det_profile"] = _profile_dict(c.det_profile)
    report.frames["det_profile"] = det_profile_frame(c.det_profile)


def _run_det(ctx: _Context, report: Report, progress_callback):
    kappa, cfg = ctx.problem.kappa, ctx.problem.series

    def both(k):
        alpha = ctx.fiber_grid.nodes[k]
        series = determinant_series(ctx.kernel, ctx.grid, alpha, kappa, cfg)
        matrix = fiber_determinant(assemble(ctx.kernel, ctx.grid, alpha), kappa)
        return matrix, series

    rows = map_fibers(both, range(ctx.fiber_grid.size), ctx.thresholds.workers, progress_callback)
    profile = L0Scalar([r[0] for r in rows], ctx.fiber_grid)
    series = [r[1] for r in rows]
    integrability = integrability_checks(ctx.kernel, ctx.grid, kappa, ctx.fiber_grid, cfg, ctx.thresholds.workers)

    report.data["det_profile"] = _profile_dict(profile)
    report.data["series"] = {
        "max_deviation": float(max(abs(s.value - d) for s, d in zip(series, profile.values))),
        "max_tail_bound": float(max(s.tail_bound for s in series)),
        "max_order_used": int(max(s.order_used for s in series)),
        "all_converged": bool(all(s.converged for s in series)),
    }
    report.data["integrability"] = {
        "all_finite": bool(integrability["all_finite"].all()),
        "max_minor_l2_sq": float(integrability["minor_l2_sq"].max()),
        "all_converged": bool(integrability["converged"].all()),
    }
    report.data["operator_norm_bound"] = operator_norm_bound(ctx.kernel, ctx.grid, ctx.fiber_grid)
    report.frames["det_profile"] = det_profile_frame(profile)
    report.frames["integrability"] = integrability


def _run_nullspace(ctx: _Context, report: Report, progress_callback):
    c = ctx.classify(progress_callback)
    report.data["classification"] = _classification_dict(c)
    if c.kind != ClassificationKind.CHARACTERISTIC:
        report.data["nullspace"] = {"m": 0, "n": 0}
        return
    direct, adjoint = null_families(ctx.kernel, ctx.grid, ctx.problem.kappa, ctx.thresholds, ctx.fiber_grid)
    m_max, lhs_check = bessel_bound(ctx.kernel, ctx.grid, 1 / ctx.problem.kappa, ctx.fiber_grid)
    independent, _ = nabla_independent(direct.functions, ctx.thresholds.rank, NablaMask(c.nullity == c.m))
    report.data["nullspace"] = {
        "m": direct.count,
        "n": adjoint.count,
        "direct_residual": direct.residual,
        "adjoint_residual": adjoint.residual,
        "nabla_independent": independent,
        "bessel_m_max": m_max,
        "bessel_direct_ok": lhs_check(direct, "direct"),
        "bessel_adjoint_ok": lhs_check(adjoint, "adjoint"),
    }


def _solvability(ctx: _Context, c: Classification) -> Solvability:
    if c.kind != ClassificationKind.CHARACTERISTIC:
        return Solvability(True)
    _, adjoint = null_families(ctx.kernel, ctx.grid, ctx.problem.kappa, ctx.thresholds, ctx.fiber_grid)
    if ctx.kernel.continuous:
        return check_solvability_l2(ctx.g0, adjoint, ctx.kernel, ctx.grid, ctx.thresholds.solvability)
    return check_solvability(ctx.g0, adjoint, ctx.thresholds.solvability)


def _run_check_solvability(ctx: _Context, report: Report, progress_callback):
    c = ctx.classify(progress_callback)
    s = _solvability(ctx, c)
    report.data["classification"] = _classification_dict(c)
    report.data["solvability"] = _solvability_dict(s)
    if not s.solvable:
        report.exit_code = EXIT_OBSTRUCTED


def _run_solve(ctx: _Context, report: Report, progress_callback):
    result = solve(ctx.kernel, ctx.grid, ctx.problem.kappa, ctx.g0, ctx.thresholds, progress_callback)
    report.data["classification"] = _classification_dict(result.classification)
    report.data["solvability"] = _solvability_dict(result.solvability)
    report.data["det_profile"] = _profile_dict(result.classification.det_profile)
    if result.direct_count is not None:
        report.data["nullspace"] = {
            "m": result.direct_count,
            "n": result.adjoint_count,
            "bessel_m_max": _bessel_m_max(ctx, result.classification.kappa),
        }
    report.frames["det_profile"] = det_profile_frame(result.classification.det_profile)
    report.frames["diagnostics"] = result.diagnostics
    if result.solution is None:
        report.exit_code = EXIT_OBSTRUCTED
        return
    summary = {
        "norm": result.solution.norm(),
        "g0_norm": ctx.g0.norm(),
        "residual": result.residual,
        "excluded_fibers": int(result.diagnostics["excluded"].sum()),
    }
    if result.orthogonality is not None:
        summary["orthogonality"] = result.orthogonality
    report.data["solution"] = summary
    report.frames["solution"] = solution_frame(result.solution)


def _run_find_characteristic(ctx: _Context, report: Report, progress_callback):
    found = find_characteristic_numbers(ctx.kernel, ctx.grid, ctx.problem.kappa_search, ctx.thresholds,
                                        ctx.fiber_grid)
    entries = []
    for kappa0, m in found:
        entries.append({"kappa": _complex(kappa0), "m": m, "bessel_m_max": _bessel_m_max(ctx, kappa0)})
    report.data["characteristic_numbers"] = entries


_HANDLERS = {
    "classify": (_run_classify, ("kappa",)),
    "det": (_run_det, ("kappa",)),
    "nullspace": (_run_nullspace, ("kappa",)),
    "check-solvability": (_run_check_solvability, ("kappa", "g0")),
    "solve": (_run_solve, ("kappa", "g0")),
    "find-characteristic": (_run_find_characteristic, ("kappa_search",)),
}


def run_command(command: str, problem: ProblemFile, csv_out: str = None,
                progress_callback: Optional[Callable[[int], None]] = None) -> Report:
    if command not in _HANDLERS:
        raise ProblemValidationError("command", f"unknown command '{command}' (choose from {', '.join(COMMANDS)})")
    handler, required = _HANDLERS[command]
    _require(problem, command, *required)

    start = time.perf_counter()
    ctx = _Context(problem)
    report = Report({"command": command, "problem": serialize_problem(problem)})
    handler(ctx, report, progress_callback)
    report.data["timing"] = {
        "elapsed_seconds": time.perf_counter() - start,
        "workers": problem.thresholds.workers,
    }
    if csv_out:
        report.write_csv(csv_out)
    logger.info("%s finished with exit code %d", command, report.exit_code)
    return report
