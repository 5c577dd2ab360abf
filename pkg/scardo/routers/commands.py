import argparse
import asyncio
import logging
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

from pydantic import ValidationError

from .. import __version__
from ..adapters import get_writer, write_trajectory
from ..config import settings
from ..errors import ConfigError, PreconditionError, ValidationFailure
from ..models.config import Experiment
from ..models.report import ComparisonSummary, ConfigSummary
from ..models.trajectory import MeanFieldTrajectory, SimTrajectory
from ..services import meanfield, replicas
from ..services.runconfig import config_digest, load_config, override_run

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

CONFIG_ERRORS = (ConfigError, ValidationError, ValidationFailure, PreconditionError)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage()
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="scardo",
        description="Stochastic simulation and mean-field analysis of opinion dynamics.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name, help_text in (
        ("validate", "parse a run config and report what it builds"),
        ("simulate", "run the stochastic replicas and write their trajectories"),
        ("meanfield", "integrate the mean-field system and write its trajectory"),
        ("compare", "simulate, integrate and report the deviation between them"),
        ("sensitivity", "central-difference sensitivity of y(horizon) to one parameter"),
    ):
        command = commands.add_parser(name, help=help_text)
        command.add_argument("config_path", nargs="?", metavar="CONFIG")
        command.add_argument("--config", dest="config_option", metavar="PATH")
        command.add_argument("--seed", type=int, help="override run.seed")
        command.add_argument("--output", metavar="DIR", help="output directory")
        command.add_argument("--replicas", type=int, help="override run.replicas")
        command.add_argument("--quiet", action="store_true", help="log warnings only")
    return parser


def _output_dir(experiment: Experiment, option: Optional[str]) -> Path:
    if option:
        return Path(option)
    if experiment.config.output.directory:
        return Path(experiment.config.output.directory)
    return Path(settings.OUTPUT_DIR)


def _simulate(experiment: Experiment) -> List[SimTrajectory]:
    return asyncio.run(replicas.run_replicas(experiment))


def _integrate(experiment: Experiment) -> MeanFieldTrajectory:
    config = experiment.config
    return meanfield.integrate(
        experiment.initial_fractions(),
        experiment.tensor,
        experiment.ranking,
        config.horizon,
        config.run.step,
        sample_interval=config.run.ode_sample_interval,
        equilibrium_tolerance=config.run.equilibrium_tolerance,
        method=config.run.method,
    )


def _write_replicas(
    trajectories: Sequence[SimTrajectory], directory: Path, prefix: str
) -> None:
    for trajectory in trajectories:
        write_trajectory(
            trajectory, directory / f"{prefix}_replica{trajectory.replica:03d}.csv"
        )


def run_validate(experiment: Experiment, _directory: Path) -> None:
    config = experiment.config
    summary = ConfigSummary(
        cardinalities=list(experiment.space.cardinalities),
        corteges=experiment.space.M,
        agents=config.population.size,
        iterations=config.iterations,
        horizon=config.horizon,
        seed=config.run.seed,
        replicas=config.run.replicas,
        tensor_storage="sparse" if experiment.tensor.is_sparse else "dense",
        config_digest=config_digest(experiment),
    )
    print(summary.model_dump_json(indent=2))


def run_simulate(experiment: Experiment, directory: Path) -> None:
    _write_replicas(_simulate(experiment), directory, experiment.config.output.prefix)


def run_meanfield(experiment: Experiment, directory: Path) -> None:
    path = directory / f"{experiment.config.output.prefix}_meanfield.csv"
    write_trajectory(_integrate(experiment), path)


def run_compare(experiment: Experiment, directory: Path) -> None:
    config = experiment.config
    prefix = config.output.prefix
    trajectories = _simulate(experiment)
    solution = _integrate(experiment)
    _write_replicas(trajectories, directory, prefix)
    write_trajectory(solution, directory / f"{prefix}_meanfield.csv")

    reports = [meanfield.compare_trajectories(sim, solution) for sim in trajectories]
    summary = ComparisonSummary(
        config_digest=config_digest(experiment),
        horizon=config.horizon,
        worst_sup_error=max(report.sup_error for report in reports),
        replicas=reports,
    )
    get_writer("json").write(summary, directory / f"{prefix}_compare.json")
    print(f"sup_error={summary.worst_sup_error:.6g}")


def run_sensitivity(experiment: Experiment, directory: Path) -> None:
    config = experiment.config
    if config.sensitivity is None:
        raise ConfigError(
            "the sensitivity command needs a 'sensitivity' section", path="sensitivity"
        )
    report = meanfield.parameter_sensitivity(
        experiment.initial_fractions(),
        experiment.tensor,
        experiment.ranking,
        config.horizon,
        config.run.step,
        config.sensitivity.target,
        config.sensitivity.epsilon,
    )
    path = directory / f"{config.output.prefix}_sensitivity.json"
    get_writer("json").write(report, path)


COMMANDS: Dict[str, Callable[[Experiment, Path], None]] = {
    "validate": run_validate,
    "simulate": run_simulate,
    "meanfield": run_meanfield,
    "compare": run_compare,
    "sensitivity": run_sensitivity,
}


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand and return its exit code.

    0 success, 1 usage error, 2 config error, 3 runtime error.
    """

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    logging.getLogger("scardo").setLevel(logging.WARNING if args.quiet else logging.NOTSET)

    if args.config_path and args.config_option:
        parser.print_usage()
        logger.error("give the config either positionally or with --config, not both")
        return EXIT_USAGE
    source = args.config_path or args.config_option
    if not source:
        parser.print_usage()
        logger.error("a config path is required")
        return EXIT_USAGE

    try:
        experiment = load_config(source)
        changes = {}
        if args.seed is not None:
            changes["seed"] = args.seed
        if args.replicas is not None:
            changes["replicas"] = args.replicas
        experiment = override_run(experiment, **changes)
        directory = _output_dir(experiment, args.output)

        logger.info("Running %s on %s", args.command, source)
        COMMANDS[args.command](experiment, directory)
    except CONFIG_ERRORS as exc:
        logger.error("Configuration error: %s", exc)
        return EXIT_CONFIG
    except Exception as exc:
        logger.error("%s failed: %s", args.command, exc)
        logger.debug("Traceback", exc_info=True)
        return EXIT_RUNTIME

    logger.info("%s finished", args.command)
    return EXIT_OK
