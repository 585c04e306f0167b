"""Numerical checks of the hypotheses behind kink asymptotic stability.

Usage:
    kink-stability (validate | kink | spectrum | darboux | fgr | hyp3 | analyze
        | simulate | selftest) [--config=<path>] [--out=<dir>] [--seed=<u64>]
        [--verbose | --quiet]
    kink-stability scan <parameter> [<values>...] [--config=<path>] [--out=<dir>]
        [--jobs=<n>] [--seed=<u64>] [--verbose | --quiet]
    kink-stability (-h | --help)
    kink-stability --version

Options:
    -h --help           Show this screen.
    --version           Show the version.
    --config=<path>     JSON run configuration; defaults apply to missing keys.
    --out=<dir>         Output directory, overrides the configuration.
    --seed=<u64>        Seed of the randomized probes, overrides the configuration.
    --jobs=<n>          Worker processes for scan, overrides the configuration.
    --verbose           Write a debug log `kink_stability.log` in the output directory.
    --quiet             Disable logging.

Scan parameters are m, eta0, delta, A and epsilon.
Exit status is 0 when every check passes, 2 when a check fails or a stage stops with
an error, and 1 for invalid input or an internal error.
"""
# Standard Library
from collections.abc import Callable
import logging
from pathlib import Path
import sys
from typing import Any

# External Party
from docopt import docopt

# My Modules
from kink_stability import LOG_NAME as PACKAGE_LOG_NAME
from kink_stability import __version__
from kink_stability.common.template import ConfigError
from kink_stability.common.template import KinkStabilityError
from kink_stability.config import RunConfig
from kink_stability.pipeline import STAGE_NAMES
from kink_stability.pipeline import HypothesisReport
from kink_stability.pipeline import run_stages
from kink_stability.pipeline import scan
from kink_stability.pipeline import selftest
from kink_stability.pipeline import simulate
from kink_stability.pipeline import write_stage_tables
from kink_stability.pipeline import write_trajectory
from kink_stability.reporting import write_json
from kink_stability.reporting import write_table

LOG_NAME = "kink_stability.cli"
LOG = logging.getLogger(LOG_NAME)

EXIT_PASS = 0
EXIT_ERROR = 1
EXIT_FAIL = 2
LOG_FILE = "kink_stability.log"
COMMANDS = (*STAGE_NAMES, "analyze", "simulate", "selftest", "scan")

STAGE_CHECKS: dict[str, Callable[[dict[str, Any]], bool]] = {
    "validate": lambda summary: summary["passed"],
    "spectrum": lambda summary: summary["hypothesis1"]["outcome"] == "pass",
    "fgr": lambda summary: summary["hypothesis2"] == "pass",
    "hyp3": lambda summary: summary["outcome"] == "pass",
}


def _describe(err: BaseException) -> str:
    return ": ".join(str(arg) for arg in err.args)


def _parse_int(value: str | None, option: str) -> int | None:
    if value is None:
        return None
    try:
        return int(value)
    except ValueError as err:
        raise ConfigError(f"{option} needs an integer, got {value!r}") from err


def load_config(args: dict[str, Any]) -> RunConfig:
    """Read the configuration file and apply the command line overrides.

    Raises:
        ConfigError: unreadable file, unknown key or value out of range
    """
    config = RunConfig.load(args["--config"]) if args["--config"] else RunConfig()
    return config.with_overrides(
        output=args["--out"],
        seed=_parse_int(args["--seed"], "--seed"),
        jobs=_parse_int(args.get("--jobs"), "--jobs"),
    )


def configure_logging(out: Path, verbose: bool, quiet: bool) -> None:
    """Attach the debug log file or silence logging."""
    if verbose:
        out.mkdir(parents=True, exist_ok=True)
        handle = logging.FileHandler(out / LOG_FILE, "w")
        handle.setFormatter(
            logging.Formatter("%(funcName)s-%(levelname)s:%(lineno)d %(message)s")
        )
        package = logging.getLogger(PACKAGE_LOG_NAME)
        package.addHandler(handle)
        package.setLevel(logging.DEBUG)
    if quiet:
        logging.disable(logging.CRITICAL)


def run_stage_command(command: str, config: RunConfig, out: Path) -> int:
    """Run the stages up to ``command`` and write their report and tables."""
    context = run_stages(config, command)
    write_stage_tables(context, out)
    write_json(
        out / f"{command}.json",
        {
            "command": command,
            "config": config.to_dict(),
            "stages": context.summaries,
            "errors": context.errors,
        },
    )
    if context.errors or command not in context.summaries:
        return EXIT_FAIL
    check = STAGE_CHECKS.get(command)
    if check is not None and not check(context.summaries[command]):
        return EXIT_FAIL
    return EXIT_PASS


def run_analyze(config: RunConfig, out: Path) -> int:
    """Run every stage and write the hypothesis report."""
    context = run_stages(config)
    report = HypothesisReport.from_context(context)
    write_stage_tables(context, out)
    write_json(out / "analyze.json", {"config": config.to_dict(), **report.to_dict()})
    print(f"verdict: {report.verdict}")
    for failure in report.failures:
        print(f"  {failure}")
    return report.exit_code


def run_simulate(config: RunConfig, out: Path) -> int:
    """Run the simulation and write the trajectory and its summary."""
    try:
        result = simulate(config)
    except ConfigError:
        raise
    except KinkStabilityError as err:
        LOG.warning("simulation stopped: %s", _describe(err))
        write_json(
            out / "simulate.json",
            {"config": config.to_dict(), "error": _describe(err)},
        )
        return EXIT_FAIL
    write_trajectory(result, out)
    write_json(out / "simulate.json", {"config": config.to_dict(), **result.to_dict()})
    print(f"stability constant: {result.summary.stability_constant}")
    return EXIT_PASS


def run_selftest(config: RunConfig, out: Path) -> int:
    """Run the golden suite and write its report."""
    report = selftest(config)
    write_json(out / "selftest.json", {"config": config.to_dict(), **report.to_dict()})
    if report.passed:
        print("selftest passed")
        return EXIT_PASS
    print("selftest failed:")
    for failure in report.failures:
        print(f"  {failure}")
    return EXIT_FAIL


def run_scan(config: RunConfig, parameter: str, raw: list[str], out: Path) -> int:
    """Run the scan and write one table row per value."""
    try:
        values = [float(value) for value in raw]
    except ValueError as err:
        raise ConfigError(f"scan values must be numbers, got {raw}") from err
    rows = scan(config, parameter, values)
    write_table(out / f"scan_{parameter}.csv", rows)
    print(f"{len(rows)} scan rows written")
    return EXIT_PASS


def dispatch(args: dict[str, Any], config: RunConfig) -> int:
    """Run the selected command."""
    out = Path(config.output)
    command = next(name for name in COMMANDS if args[name])
    LOG.info("%s starting %s %s", "-" * 20, command, "-" * 20)
    match command:
        case "analyze":
            return run_analyze(config, out)
        case "simulate":
            return run_simulate(config, out)
        case "selftest":
            return run_selftest(config, out)
        case "scan":
            return run_scan(config, args["<parameter>"], args["<values>"], out)
        case _:
            return run_stage_command(command, config, out)


def main(argv: list[str] | None = None) -> int:
    """Entry point of the ``kink-stability`` command."""
    args = docopt(__doc__, argv=argv, version=__version__)
    try:
        config = load_config(args)
        configure_logging(Path(config.output), args["--verbose"], args["--quiet"])
        return dispatch(args, config)
    except KinkStabilityError as err:
        LOG.warning("%s", _describe(err))
        print(f"error: {_describe(err)}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as err:
        LOG.exception("internal error")
        print(f"internal error: {err!r}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
