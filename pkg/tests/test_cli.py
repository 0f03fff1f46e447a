import json

import pandas as pd
import pytest

from core.problem_file import problem_from_dict
from core.report import EXIT_ERROR, EXIT_OBSTRUCTED, EXIT_OK, run_command
from main import main

ONE = {"terms": [{"x": "one"}]}


@pytest.fixture
def write_problem_file(tmp_path):
    def write(**fields):
        data = {"domain": [0, 1], "grid": {"rule": "gauss", "n": 8, "fiber_n": 21},
                "kernel": {"builtin": "constant", "value": 1}, **fields}
        path = tmp_path / "problem.json"
        path.write_text(json.dumps(data))
        return str(path)
    return write


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, (json.loads(out) if code != EXIT_ERROR and out.strip().startswith("{") else out)


def test_solve_regular(capsys, write_problem_file):
    code, report = run(capsys, "solve", "--problem", write_problem_file(kappa=0.5, g0=ONE))
    assert code == EXIT_OK
    assert report["classification"]["kind"] == "regular"
    assert report["solution"]["residual"] <= 1e-10
    assert report["solution"]["norm"] == pytest.approx(2.0, abs=1e-12)
    assert set(report["timing"]) == {"elapsed_seconds", "workers"}


def test_solve_with_zero_kappa_returns_the_right_hand_side(capsys, write_problem_file):
    code, report = run(capsys, "solve", "--problem", write_problem_file(kappa=0, g0={"terms": [{"x": "t"}]}))
    assert code == EXIT_OK
    assert report["solution"]["norm"] == pytest.approx(report["solution"]["g0_norm"])
    assert report["solution"]["residual"] == pytest.approx(0.0, abs=1e-15)


def test_obstructed_exit_code(capsys, write_problem_file):
    path = write_problem_file(kappa=1, g0=ONE)
    code, report = run(capsys, "check-solvability", "--problem", path)
    assert code == EXIT_OBSTRUCTED
    assert report["solvability"]["verdict"] == "obstructed"
    assert len(report["solvability"]["witness"]) == 21

    code, report = run(capsys, "solve", "--problem", path)
    assert code == EXIT_OBSTRUCTED
    assert "solution" not in report
    assert report["nullspace"]["bessel_m_max"] == 1
    assert all(abs(re) <= 1e-12 and im == 0 for _, re, im in report["det_profile"])

    _, report = run(capsys, "classify", "--problem", path)
    assert report["classification"]["kind"] == "characteristic"
    assert report["classification"]["bessel_m_max"] == 1


def test_solvable_characteristic_case(capsys, write_problem_file):
    path = write_problem_file(kappa=1, g0={"terms": [{"x": "t"}, {"coef": -0.5}]})
    code, report = run(capsys, "solve", "--problem", path)
    assert code == EXIT_OK
    assert report["classification"]["kind"] == "characteristic"
    assert report["nullspace"] == {"m": 1, "n": 1, "bessel_m_max": 1}
    assert len(report["det_profile"]) == 21
    assert report["solution"]["orthogonality"] <= 1e-10


def test_det_writes_csv_profile(capsys, tmp_path, write_problem_file):
    out_dir = tmp_path / "csv"
    code, report = run(capsys, "det", "--problem", write_problem_file(kappa=0.5), "--csv-out", str(out_dir))
    assert code == EXIT_OK
    profile = pd.read_csv(out_dir / "det_profile.csv")
    assert list(profile.columns) == ["alpha", "Re D1", "Im D1"]
    assert len(profile) == 21
    assert ((profile["Re D1"] - 0.5).abs() <= 1e-12).all()
    assert report["series"]["max_deviation"] <= 1e-10
    assert report["integrability"]["all_finite"]
    assert report["operator_norm_bound"] == pytest.approx(1.0)


def test_nullspace_command(capsys, write_problem_file):
    code, report = run(capsys, "nullspace", "--problem", write_problem_file(kappa=1))
    assert code == EXIT_OK
    nullspace = report["nullspace"]
    assert (nullspace["m"], nullspace["n"], nullspace["bessel_m_max"]) == (1, 1, 1)
    assert nullspace["nabla_independent"] and nullspace["bessel_direct_ok"] and nullspace["bessel_adjoint_ok"]


def test_find_characteristic_command(capsys, write_problem_file):
    path = write_problem_file(kernel={"builtin": "polynomial", "p": 1, "r": 1},
                              kappa_search={"re": [0, 5], "im": [-1, 1]})
    code, report = run(capsys, "find-characteristic", "--problem", path)
    assert code == EXIT_OK
    (entry,) = report["characteristic_numbers"]
    assert entry["kappa"][0] == pytest.approx(3.0, abs=1e-10)
    assert entry["m"] == 1 and entry["bessel_m_max"] == 1


def test_classify_honours_fiber_and_tau_flags(capsys, write_problem_file):
    path = write_problem_file(kernel={"builtin": "polynomial", "t": 1}, kappa=2)
    code, report = run(capsys, "classify", "--problem", path, "--fibers", "21")
    assert code == EXIT_OK
    assert report["classification"]["kind"] == "singular-fibers"
    assert len(report["det_profile"]) == 21

    assert main(["classify", "--problem", path, "--fibers", "21", "--tau", "0.01"]) == EXIT_ERROR
    assert "--fibers" in capsys.readouterr().err

    _, report = run(capsys, "classify", "--problem", path, "--fibers", "101", "--tau", "0.01")
    assert report["classification"]["kind"] == "singular-fibers"
    assert len(report["det_profile"]) == 101


def test_reports_do_not_depend_on_workers(capsys, write_problem_file):
    path = write_problem_file(kernel={"builtin": "gaussian_bump", "width": 0.3}, kappa=[0.5, 0.1],
                              g0={"terms": [{"x": "sin", "y": "t"}]})
    reports = []
    for workers in ("1", "8"):
        code, report = run(capsys, "solve", "--problem", path, "--workers", workers)
        assert code == EXIT_OK
        assert report.pop("timing")["workers"] == int(workers)
        reports.append(report)
    assert reports[0] == reports[1]


def test_kernels_command(capsys):
    code = main(["kernels"])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert "constant: Constant Kernel" in out
    assert "gaussian_bump" in out


def test_errors_exit_with_one(capsys, tmp_path, write_problem_file):
    assert main(["solve"]) == EXIT_ERROR

    broken = tmp_path / "broken.json"
    broken.write_text("{\n  oops\n}")
    assert main(["solve", "--problem", str(broken)]) == EXIT_ERROR
    assert "line 2" in capsys.readouterr().err

    assert main(["solve", "--problem", write_problem_file(kappa=0.5)]) == EXIT_ERROR
    assert "g0" in capsys.readouterr().err


def test_run_command_without_the_cli():
    problem = problem_from_dict({"domain": [0, 1], "grid": {"n": 6}, "kernel": {"builtin": "constant"},
                                 "kappa": 0.25})
    report = run_command("classify", problem)
    assert report.exit_code == EXIT_OK
    assert report.data["classification"]["min_abs_det"] == pytest.approx(0.75)
    assert report.frames["det_profile"].shape == (21, 3)


def test_find_characteristic_on_default_fiber_grid(capsys, tmp_path):
    path = tmp_path / "y.json"
    path.write_text(json.dumps({"domain": [0, 1], "grid": {"rule": "gauss", "n": 16},
                                "kernel": {"builtin": "polynomial", "t": 1}, "kappa_search": {"re": [-10, 10]}}))
    code, report = run(capsys, "find-characteristic", "--problem", str(path))
    assert code == EXIT_OK
    assert report["problem"]["grid"]["fiber_n"] == 21
    assert report["characteristic_numbers"] == []
