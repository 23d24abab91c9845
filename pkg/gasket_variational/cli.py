import argparse
import dataclasses
import logging
import pathlib
import sys
import typing

from . import artifacts
from .analysis import format_table
from .analysis import run_suite
from .config import RunConfig
from .config import default_threads
from .config import load_config
from .data_types import ModelSpec
from .data_types import SolverResult
from .errors import GasketVariationalError
from .errors import InfeasibleProblemError
from .errors import InputError
from .errors import NonCoerciveError
from .models import build_model
from .models.base import EnergyModel
from .solvers import ObstacleSpec
from .solvers import cubic
from .solvers import linear
from .solvers import poincare_constant
from .solvers import solve_anisotropic
from .solvers import solve_constrained_poisson
from .solvers import solve_obstacle
from .solvers import solve_p_dirichlet

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VERIFICATION_FAILED = 1
EXIT_INVALID = 2
EXIT_NOT_CONVERGED = 3
DEFAULT_OUTPUT = "out"


def solve(
    config: RunConfig, model: EnergyModel
) -> SolverResult | float:
    data = config.data
    solver = config.solver
    if config.problem == "dirichlet":
        return solve_p_dirichlet(
            model, solver.p, data.get("boundary"), config.region, solver
        )
    if config.problem == "anisotropic":
        return solve_anisotropic(
            model, solver.p, data.get("boundary"), config.region, solver
        )
    if config.problem == "constrained":
        options = config.constraint
        if options.kind == "cubic":
            spec = cubic(options.c, growth=options.growth)
        else:
            spec = linear(options.offset)
        return solve_constrained_poisson(
            model, solver.p, spec, data.get("boundary"), config.region, solver
        )
    if config.problem == "obstacle":
        spec = ObstacleSpec(
            obstacle=data["obstacle"],
            source=data.get("source", 0.0),
            boundary=data.get("boundary"),
        )
        return solve_obstacle(
            model, spec, config.region, solver, initial=data.get("initial")
        )
    if config.problem == "poincare":
        return poincare_constant(model, config.region, solver.p)
    raise InputError(f"{config.problem!r} is not a solver problem")


def write_measure_table(level: int, output: pathlib.Path | None) -> int:
    rows = artifacts.measure_table(level)
    if output is None:
        artifacts.write_measure_table(sys.stdout, rows)
        return EXIT_OK
    output = artifacts.ensure_output(output)
    with open(output / artifacts.MEASURE_TABLE_FILE, "wt", newline="") as fo:
        artifacts.write_measure_table(fo, rows)
    logger.info("Wrote %s cells to %s", len(rows), output)
    return EXIT_OK


def run(config: RunConfig, output: pathlib.Path | None = None) -> int:
    """Execute one configured problem and write its artifacts, returns the exit code"""
    if config.problem == "measure-table":
        if output is None and config.output is not None:
            output = pathlib.Path(config.output)
        return write_measure_table(config.level, output)
    output = artifacts.ensure_output(output or config.output or DEFAULT_OUTPUT)
    model = build_model(config.model)
    summary = dict(
        problem=config.problem,
        region=config.region,
        solver=dataclasses.asdict(config.solver),
        verify=dataclasses.asdict(config.verify),
        constraint=dataclasses.asdict(config.constraint),
    )

    if config.problem == "verify":
        reports = run_suite(
            model,
            ps=config.verify.ps,
            seeds=config.verify.seeds,
            threads=config.threads,
            samples=config.verify.samples,
            rank_levels=config.verify.rank_levels,
        )
        payload = artifacts.result_payload(config.problem, model, reports, summary)
        artifacts.write_json(output / artifacts.RESULT_FILE, payload)
        print(format_table(reports))
        if all(report.passed for report in reports):
            return EXIT_OK
        return EXIT_VERIFICATION_FAILED

    result = solve(config, model)
    payload = artifacts.result_payload(config.problem, model, result, summary)
    artifacts.write_json(output / artifacts.RESULT_FILE, payload)
    if not isinstance(result, SolverResult):
        print(f"poincare constant: {result:.17g}")
        return EXIT_OK
    artifacts.write_trace(output / artifacts.TRACE_FILE, result)
    artifacts.write_solution(output / artifacts.SOLUTION_FILE, model, result.u)
    if not result.converged:
        print(
            f"solver did not converge ({result.status}), last residual {result.residual:.6e}",
            file=sys.stderr,
        )
        return EXIT_NOT_CONVERGED
    print(
        f"{config.problem}: objective {result.objective:.17g}, "
        f"residual {result.residual:.3e}, {result.iterations} iterations"
    )
    return EXIT_OK


def override(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    changes: dict[str, typing.Any] = {}
    if args.seed is not None:
        changes["solver"] = dataclasses.replace(config.solver, seed=args.seed)
        changes["verify"] = dataclasses.replace(config.verify, seeds=(args.seed,))
    if args.threads is not None:
        changes["threads"] = args.threads
    if getattr(args, "level", None) is not None:
        changes["level"] = args.level
    return dataclasses.replace(config, **changes) if changes else config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gasket-variational",
        description="Solve variational problems on measure-energy spaces "
        "and verify the inequalities of their p-energies.",
    )
    parser.add_argument(
        "--log-level",
        default="WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="logging level (default WARNING)",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    def add_common(subparser, config_required):
        subparser.add_argument(
            "--config",
            required=config_required,
            metavar="FILE",
            help="flat `key = value` config, or JSON when the name ends in .json",
        )
        subparser.add_argument("--out", metavar="DIR", help="output directory")
        subparser.add_argument("--seed", type=int, help="override the random seed")
        subparser.add_argument(
            "--threads",
            type=int,
            help="threads of the verification suite "
            "(default $GASKET_VARIATIONAL_THREADS or 1)",
        )

    add_common(subparsers.add_parser("run", help="run a configured problem"), True)
    add_common(
        subparsers.add_parser("verify", help="run the verification suite"), False
    )
    measure = subparsers.add_parser(
        "measure-table", help="write the Kusuoka cell measure table"
    )
    add_common(measure, False)
    measure.add_argument("--level", type=int, help="gasket level (default 3)")
    add_common(
        subparsers.add_parser("export-model", help="export the assembled model"), True
    )
    return parser


def command_config(args: argparse.Namespace) -> RunConfig:
    if args.config is not None:
        config = load_config(args.config)
    else:
        config = RunConfig(
            model=ModelSpec(name="sierpinski", params=dict(level=3)),
            problem=args.command,
            threads=default_threads(),
        )
    if args.command in ("verify", "measure-table"):
        config = dataclasses.replace(config, problem=args.command)
    return override(config, args)


def main(argv: typing.Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level)
    output = None if args.out is None else pathlib.Path(args.out)
    try:
        config = command_config(args)
        if args.command == "export-model":
            model = build_model(config.model)
            output = artifacts.ensure_output(output or config.output or DEFAULT_OUTPUT)
            artifacts.export_model(output / artifacts.MODEL_FILE, model)
            return EXIT_OK
        return run(config, output)
    except (InputError, InfeasibleProblemError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NonCoerciveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except GasketVariationalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
