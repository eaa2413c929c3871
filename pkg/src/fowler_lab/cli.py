"""
Command line front end of the lab.

Builds a scenario from a JSON file or from flags, runs the matching
experiment and writes its artifacts. Exceptions are converted to exit
codes here and nowhere else.
"""

import argparse
import json
import logging
import multiprocessing
import os
import sys
from pathlib import Path
from typing import Any

from .errors import LabError, ScenarioFileError, ValidationError
from .experiments import (
    SWEEP_COLUMNS,
    ExperimentFactory,
    ExperimentResult,
    SweepTask,
    evaluate_sweep_point,
)
from .integrator import IntegratorConfig
from .logging_config import LOG_LEVELS, configure_logging
from .scenario import OUTPUT_FORMATS, Scenario, parse_scenario, parse_scenario_file
from .writers import Table, open_output, write_csv, write_json

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_VALIDATION = 2
EXIT_USAGE = 64
EXIT_NO_INPUT = 66

SCENARIO_ONLY = ("perturbed", "sweep")


class LabArgumentParser(argparse.ArgumentParser):
    """Argument parser that exits with the usage code on bad flags."""

    def error(self, message: str) -> None:
        """Print the usage and exit with the usage code."""
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common_flags() -> argparse.ArgumentParser:
    common = LabArgumentParser(add_help=False)
    common.add_argument("--scenario", help="Scenario JSON file (schema 1)")
    common.add_argument("--n", type=int, help="Dimension n >= 3")
    common.add_argument("--rel-tol", type=float, help="Relative tolerance")
    common.add_argument("--abs-tol", type=float, help="Absolute tolerance")
    common.add_argument("--out", help="Output path (default: stdout)")
    common.add_argument("--format", choices=OUTPUT_FORMATS, dest="fmt")
    common.add_argument(
        "--jobs", type=int, help="Worker processes for sweeps"
    )
    common.add_argument("--log-level", choices=LOG_LEVELS)
    return common


def build_parser() -> argparse.ArgumentParser:
    """Build the parser with one subcommand per experiment kind."""
    parser = LabArgumentParser(
        prog="fowler-lab",
        description="Numerical lab for singular solutions of coupled "
        "critical elliptic systems.",
    )
    common = _common_flags()
    commands = parser.add_subparsers(
        dest="command", required=True, parser_class=LabArgumentParser
    )

    profile = commands.add_parser(
        "profile", parents=[common], help="Fowler profile and its energy"
    )
    profile.add_argument("--eps", type=float)
    profile.add_argument("--periods", type=float)

    floquet = commands.add_parser(
        "floquet", parents=[common], help="Monodromy of the Jacobi modes"
    )
    floquet.add_argument("--eps", type=float)
    floquet.add_argument("--jmax", type=int)

    pohozaev = commands.add_parser(
        "pohozaev", parents=[common], help="Pohozaev integral along a run"
    )
    source = pohozaev.add_mutually_exclusive_group()
    source.add_argument("--eps", type=float)
    source.add_argument("--bubble", action="store_true", default=None)
    pohozaev.add_argument("--t-end", type=float)
    pohozaev.add_argument("--direction", type=float, nargs=2)

    classify = commands.add_parser(
        "classify", parents=[common], help="Ray classification of a run"
    )
    for name in ("--v1", "--v2", "--w1", "--w2"):
        classify.add_argument(name, type=float)
    classify.add_argument("--t-end", type=float)

    perturbed = commands.add_parser(
        "perturbed", parents=[common], help="Perturbed run and its fit"
    )
    perturbed.add_argument("--summary", help="Fit summary JSON path")

    commands.add_parser(
        "sweep", parents=[common], help="Parameter sweep over eps"
    )
    return parser


def parse_arguments(argv: list[str] | None = None) -> argparse.Namespace:
    """Parse command line arguments."""
    return build_parser().parse_args(argv)


def _flag_params(args: argparse.Namespace) -> dict[str, Any]:
    if args.command == "classify":
        flags = {"v": (args.v1, args.v2), "w": (args.w1, args.w2)}
        ic = {k: list(v) for k, v in flags.items() if None not in v}
        params: dict[str, Any] = {"ic": ic, "t_end": args.t_end}
    elif args.command == "pohozaev":
        params = {
            "eps": args.eps,
            "bubble": args.bubble,
            "t_end": args.t_end,
            "direction": args.direction,
        }
    elif args.command == "floquet":
        params = {"eps": args.eps, "jmax": args.jmax}
    else:
        params = {"eps": args.eps, "periods": args.periods}
    return {k: v for k, v in params.items() if v is not None}


def build_scenario(args: argparse.Namespace) -> Scenario:
    """
    Build the scenario of a command.

    Raises:
        ScenarioFileError: If the scenario file cannot be read
        ValidationError: If the scenario or the flags are invalid
    """
    if args.scenario:
        scenario = parse_scenario_file(args.scenario)
        if scenario.kind != args.command:
            raise ValidationError(
                f"Scenario kind {scenario.kind!r} does not match "
                f"command {args.command!r}",
                code="SCHEMA",
            )
        if args.n is not None and args.n != scenario.dim.n:
            raise ValidationError(
                f"--n {args.n} contradicts the scenario dimension "
                f"{scenario.dim.n}",
                code="SCHEMA",
            )
    elif args.command in SCENARIO_ONLY:
        raise ValidationError(
            f"{args.command} requires --scenario", code="SCHEMA"
        )
    else:
        scenario = parse_scenario(
            {
                "schema": 1,
                "kind": args.command,
                "n": args.n,
                "params": _flag_params(args),
            }
        )
    return scenario.with_overrides(
        rel_tol=args.rel_tol,
        abs_tol=args.abs_tol,
        out=args.out,
        fmt=args.fmt,
        summary_out=getattr(args, "summary", None),
    )


def integrator_config(scenario: Scenario) -> IntegratorConfig:
    """
    Return the integrator tolerances of a scenario.

    A relative tolerance given alone sets the absolute one a hundred
    times smaller, capped at the default.
    """
    base = IntegratorConfig.default()
    rel_tol = scenario.rel_tol if scenario.rel_tol is not None else base.rel_tol
    abs_tol = scenario.abs_tol
    if abs_tol is None:
        abs_tol = min(base.abs_tol, rel_tol * 1e-2)
    return IntegratorConfig(rel_tol=rel_tol, abs_tol=abs_tol)


def run_sweep(
    scenario: Scenario, cfg: IntegratorConfig, jobs: int | None = None
) -> tuple[Table, bool]:
    """
    Evaluate every grid point of a sweep scenario.

    Rows come back in grid order whatever the number of workers.

    Returns:
        The aggregated table and whether any row failed
    """
    params = scenario.params
    quantity = params["quantity"]
    tasks = [
        SweepTask(
            quantity,
            scenario.dim.n,
            eps,
            params["t_end"],
            cfg.rel_tol,
            cfg.abs_tol,
        )
        for eps in params["grid"]
    ]
    if jobs is not None and jobs < 1:
        raise ValidationError("--jobs must be positive", code="SCHEMA")
    workers = min(jobs or os.cpu_count() or 1, len(tasks))
    logger.info("Sweep of %d points on %d workers", len(tasks), workers)
    if workers == 1:
        rows = [evaluate_sweep_point(task) for task in tasks]
    else:
        with multiprocessing.Pool(processes=workers) as pool:
            rows = pool.map(evaluate_sweep_point, tasks)
    failed = any(row[-1] != "ok" for row in rows)
    return Table(SWEEP_COLUMNS[quantity], rows), failed


def _summary_path(scenario: Scenario) -> str | None:
    if scenario.summary_out:
        return scenario.summary_out
    if scenario.out:
        return f"{Path(scenario.out).with_suffix('')}.fit.json"
    return None


def write_artifacts(
    scenario: Scenario, result: ExperimentResult, fmt: str
) -> None:
    """Write the table or document, and a fit summary next to a CSV."""
    with open_output(scenario.out) as stream:
        if fmt == "csv":
            write_csv(result.table, stream)
        else:
            write_json(result.document, stream)
    if fmt != "csv" or result.summary is None:
        return
    path = _summary_path(scenario)
    if path is None:
        logger.info("No summary path given; fit summary not written")
        return
    with open_output(path) as stream:
        write_json(result.summary, stream)


def _report_error(error: LabError) -> None:
    print(json.dumps(error.as_dict()), file=sys.stderr)


def run_command(argv: list[str] | None = None) -> int:
    """
    Run one command line.

    Returns:
        Process exit code
    """
    try:
        args = parse_arguments(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    try:
        configure_logging(args.log_level)
    except ValueError as e:
        _report_error(ValidationError(str(e), code="LOG_LEVEL"))
        return EXIT_VALIDATION

    try:
        scenario = build_scenario(args)
        cfg = integrator_config(scenario)
        if scenario.kind == "sweep":
            table, failed = run_sweep(scenario, cfg, args.jobs)
            fmt = scenario.fmt or "csv"
            write_artifacts(
                scenario,
                ExperimentResult(table=table, document=table.as_dict()),
                fmt,
            )
            return EXIT_FAILURE if failed else EXIT_OK
        experiment = ExperimentFactory.create(scenario.kind)
        fmt = scenario.fmt or ("json" if experiment.json_only else "csv")
        if fmt == "csv" and experiment.json_only:
            raise ValidationError(
                f"{scenario.kind} output is JSON only", code="FORMAT"
            )
        write_artifacts(scenario, experiment.run(scenario, cfg), fmt)
        return EXIT_OK
    except ScenarioFileError as e:
        _report_error(e)
        return EXIT_NO_INPUT
    except ValidationError as e:
        _report_error(e)
        return EXIT_VALIDATION
    except LabError as e:
        logger.error("Computation failed: %s", e)
        _report_error(e)
        return EXIT_FAILURE


def main() -> int:
    """Main entry point for the script."""
    return run_command(sys.argv[1:])
