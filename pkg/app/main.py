"""Command-line entry point."""
import argparse
import logging
import sys
from typing import List, Optional

from app.commands import build_registry, build_run_config, read_config_file
from app.commands import certify, figures, integrate, norm, verify
from app.config import settings
from app.errors import FinslerError

logger = logging.getLogger(__name__)

COMMANDS = {
    "norm": norm,
    "integrate": integrate,
    "verify": verify,
    "certify": certify,
    "figures": figures,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="finsler-geodesics",
        description=settings.app_description,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.app_version}")
    parser.add_argument("--config", help="JSON run configuration; flags override its values")
    parser.add_argument("--definitions", help="JSON file with extra norm and field definitions")
    parser.add_argument("--log-level", dest="log_level", default=None,
                        help=f"Logging level (default: {settings.log_level})")
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    for module in COMMANDS.values():
        module.register(subparsers)
    return parser


def configure_logging(level: Optional[str]) -> None:
    name = (level or settings.log_level).upper()
    logging.basicConfig(
        level=getattr(logging, name, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)

    try:
        if args.command == "verify" and getattr(args, "list_scenarios", False):
            return verify.list_scenarios()
        file_values = read_config_file(args.config) if args.config else {}
        config = build_run_config(args, file_values)
        if config.command not in COMMANDS:
            parser.print_help(sys.stderr)
            return 2
        registry = build_registry(config)
        return COMMANDS[config.command].run(config, registry)
    except FinslerError as e:
        logger.debug(f"{type(e).__name__}: {e.detail}")
        print(f"error: {e.detail}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.error(f"Unexpected error: {e}", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
