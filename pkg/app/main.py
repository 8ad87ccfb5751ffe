import argparse
import sys
from collections.abc import Sequence

from app.commands import MODULES
from app.core.config import settings
from app.core.context import RunContext
from app.core.errors import register_exception_handlers
from app.core.logging import get_logger, setup_logging
from app.core.runner import CommandRunner


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python -m app",
        description=f"{settings.PROJECT_NAME}: classical vs quantum phase sensing, from fringes to speech tests.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for module in MODULES:
        module.register(subparsers)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(settings.LOG_LEVEL)

    context = RunContext(command=args.command, seed=args.seed)
    runner = CommandRunner()
    register_exception_handlers(runner)

    get_logger(__name__, context).info("Starting %s", args.command)
    return runner.run(args.handler, args, context)


if __name__ == "__main__":
    sys.exit(main())
