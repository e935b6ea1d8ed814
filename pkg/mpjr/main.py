"""Command-line entry point."""

import argparse
import sys
from typing import List, Optional

import structlog

from mpjr.commands import check_law, mesh_dump, preprocess, run
from mpjr.config import settings
from mpjr.core.exceptions import handle_exception
from mpjr.core.logging_config import setup_logging

logger = structlog.get_logger()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mpjr", description=settings.PROJECT_NAME)
    parser.add_argument("--version", action="version", version=settings.VERSION)
    parser.add_argument("--log-level", default=None, help="Override LOG_LEVEL")
    subparsers = parser.add_subparsers(dest="command", required=True)

    run.add_parser(subparsers)
    check_law.add_parser(subparsers)
    preprocess.add_parser(subparsers)
    mesh_dump.add_parser(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run one command and return its exit code."""
    args = build_parser().parse_args(argv)
    setup_logging(settings.ENVIRONMENT, args.log_level)
    logger.debug("cli_started", command=args.command, version=settings.VERSION)

    try:
        return args.handler(args)
    except Exception as e:
        return handle_exception(e)


if __name__ == "__main__":
    sys.exit(main())
