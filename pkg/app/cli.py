"""
Command-line entry point.

    python run.py run --method BFN --delta-data 10
    python run.py run --config experiment.env --set noise_level=0.3
    python run.py table1 --master-seed 3 --workers 4
    python run.py phantom --phantom-kind triangle --output phantom.csv
    python run.py serve

Every experiment key is available as a flag (`--delta-data`) and as a
`--set key=value` pair; flags override pairs, which override the file.
"""
import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from app.config import get_settings
from app.exceptions import ConfigError, ReconstructionError
from app.models.schemas import ExperimentConfig
from app.services.experiment_service import ExperimentService, load_config_source, parse_config
from app.services.phantom_service import generate_phantom, write_phantom_csv
from app.services.results_writer import summary_frame
from app.utils.logger import get_logger, setup_logging

logger = get_logger(__name__)


def _add_config_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="dotenv-style or .json experiment file")
    parser.add_argument(
        "-s", "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE", help="experiment key"
    )
    group = parser.add_argument_group("experiment keys")
    for name, info in ExperimentConfig.model_fields.items():
        default = info.get_default(call_default_factory=True)
        group.add_argument(
            f"--{name.replace('_', '-')}",
            dest=name,
            default=None,
            metavar="VALUE",
            help=f"default: {default}".replace("%", "%%"),
        )


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    raw = load_config_source(args.config)
    raw.update(load_config_source(list(args.overrides)))
    flags = {name: getattr(args, name) for name in ExperimentConfig.model_fields}
    return parse_config(raw, overrides=flags)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="run.py",
        description="Reconstruct the initial pressure of a 1-D wave from sensor records.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run a single experiment")
    _add_config_arguments(run)

    sweep = commands.add_parser(
        "table1", aliases=["sweep"], help="run every settings row against every method"
    )
    sweep.add_argument("--master-seed", type=int, default=0)
    sweep.add_argument("--variants", action="store_true", help="add the single-sensor attenuated BF-SEEK cell")
    sweep.add_argument("--workers", type=int, default=None, help="parallel cells (default: settings)")
    _add_config_arguments(sweep)

    phantom = commands.add_parser("phantom", help="write the phantom as x,value CSV")
    phantom.add_argument("--output", type=Path, default=None, help="CSV path (default: <output_dir>/phantom.csv)")
    _add_config_arguments(phantom)

    commands.add_parser("serve", help="start the HTTP service")
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    outcome = ExperimentService().run_experiment(config)
    result = outcome.result
    rms = "n/a" if result.rms_percent is None else f"{result.rms_percent:.4g}"
    print(
        f"{result.method} [{config.settings_label}] rms_percent={rms} "
        f"iterations={result.iterations_used} converged={result.converged} diverged={result.diverged}"
    )
    for path in outcome.artifacts:
        print(path)
    return 0


def _cmd_table1(args: argparse.Namespace) -> int:
    base = _config_from_args(args)
    sweep = ExperimentService().run_sweep(
        base=base,
        master_seed=args.master_seed,
        variants=args.variants,
        workers=args.workers,
    )
    print(summary_frame(sweep.cells).to_string(index=False))
    return 0


def _cmd_phantom(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    grid = config.grid()
    phantom = generate_phantom(config.phantom_spec(), grid)
    output = args.output or (config.output_dir or get_settings().output_dir) / "phantom.csv"
    print(write_phantom_csv(phantom, grid, output))
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    settings = get_settings()
    uvicorn.run(
        "app.main:app",
        host=settings.host,
        port=settings.port,
        reload=settings.debug,
        log_level=settings.log_level.lower(),
    )
    return 0


COMMANDS = {
    "run": _cmd_run,
    "table1": _cmd_table1,
    "sweep": _cmd_table1,
    "phantom": _cmd_phantom,
    "serve": _cmd_serve,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        logger.error("invalid configuration", key=e.key, error=str(e))
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ReconstructionError as e:
        logger.error("command failed", command=args.command, error=str(e))
        print(f"error: {e}", file=sys.stderr)
        return 1
