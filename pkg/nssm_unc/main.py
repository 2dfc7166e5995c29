import argparse
import importlib
import pkgutil
import sys
from types import ModuleType

from loguru import logger

from nssm_unc import __version__
from nssm_unc.cli import commands
from nssm_unc.cli.options import common_options
from nssm_unc.core.exceptions import NssmUncError
from nssm_unc.core.lifespan import run_lifespan
from nssm_unc.core.middlewares.stage_middleware import run_stage
from nssm_unc.pipeline.services import PipelineService


def register_all_commands(
    subparsers: "argparse._SubParsersAction[argparse.ArgumentParser]",
    package: ModuleType,
) -> list[str]:
    """
    Registers every subcommand module found under nssm_unc/cli/commands/

    Args:
        subparsers: argparse subparser group
        package: commands package
    """
    parents = [common_options()]
    names = []
    for _, module_name, _ in pkgutil.iter_modules(package.__path__):
        module = importlib.import_module(f"{package.__name__}.{module_name}")
        if hasattr(module, "register"):
            module.register(subparsers, parents)
            names.append(module_name)
    return names


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nssm-unc",
        description="Neural state-space identification with Laplace predictive uncertainty",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    register_all_commands(subparsers, commands)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    try:
        cfg = PipelineService.load_config(args.config, fast=args.fast, seed=args.seed)
    except NssmUncError as e:
        print(e.one_line(), file=sys.stderr)
        return e.exit_code

    with run_lifespan(cfg.paths.run_dir, cfg.log_level):
        try:
            run_stage(args.stage, lambda: args.handler(cfg))
        except NssmUncError as e:
            print(e.one_line(), file=sys.stderr)
            return e.exit_code
        except Exception as e:
            # traceback already logged by run_stage
            print(f"error[internal]: {type(e).__name__}: {e}", file=sys.stderr)
            return 1
    logger.debug(f"{args.stage} finished")
    return 0


if __name__ == "__main__":
    sys.exit(main())
