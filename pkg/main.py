import argparse
import logging
import sys
import traceback

from core.errors import PIEError, ProblemParseError, ProblemValidationError
from core.problem_file import parse_problem
from core.report import COMMANDS, EXIT_ERROR, run_command
from kernels.catalog import load_kernels

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pie",
        description="Solve and classify partial integral equations f - kappa*Sf = g0",
    )
    parser.add_argument("command", choices=COMMANDS + ("kernels",))
    parser.add_argument("--problem", help="JSON problem file")
    parser.add_argument("--csv-out", help="directory for CSV profiles")
    parser.add_argument("--fibers", type=int, help="number of fiber nodes (overrides grid.fiber_n)")
    parser.add_argument("--tol-solve", type=float, help="solvability and residual acceptance tolerance")
    parser.add_argument("--tau", type=float, help="fiber fraction that counts as positive measure")
    parser.add_argument("--workers", type=int, help="threads for per-fiber work")
    parser.add_argument("--verbose", action="store_true", help="debug logging on stderr")
    return parser


def list_kernels() -> str:
    lines = []
    for name, kernel_class in sorted(load_kernels().items()):
        lines.append(f"{name}: {kernel_class.description.splitlines()[0]}")
    return "\n".join(lines)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    try:
        if args.command == "kernels":
            print(list_kernels())
            return 0
        if not args.problem:
            raise ProblemValidationError("--problem", f"required by '{args.command}'")

        problem = parse_problem(args.problem).with_overrides(
            fibers=args.fibers, tol_solve=args.tol_solve, tau=args.tau, workers=args.workers
        )
        report = run_command(
            args.command, problem, args.csv_out,
            progress_callback=lambda percent: logger.debug("%s: %d%%", args.command, percent),
        )
        print(report.to_json())
        return report.exit_code
    except (ProblemParseError, ProblemValidationError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except PIEError as e:
        print(f"Error ({type(e).__name__}): {e}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as e:
        print("Error occurred:", file=sys.stderr)
        print(f"Error message: {str(e)}", file=sys.stderr)
        print("\nFull traceback:", file=sys.stderr)
        traceback.print_exc()
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
