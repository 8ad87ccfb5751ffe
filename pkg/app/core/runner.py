import argparse
from collections.abc import Callable
from typing import Any, TypeVar

from app.core.context import RunContext
from app.core.errors import ExitCode
from app.core.logging import get_logger

ExcT = TypeVar("ExcT", bound=BaseException)
Handler = Callable[[RunContext, Any], ExitCode]
Command = Callable[[argparse.Namespace, RunContext], None]


class CommandRunner:
    """
    Runs one subcommand with centralized error handling.
    - handlers are looked up along the exception MRO
    - the most specific registered type wins
    """

    def __init__(self) -> None:
        self._handlers: dict[type[BaseException], Handler] = {}

    def exception_handler(self, exc_type: type[ExcT]) -> Callable[[Handler], Handler]:
        def decorator(func: Handler) -> Handler:
            self._handlers[exc_type] = func
            return func

        return decorator

    def resolve(self, exc: BaseException) -> Handler | None:
        for klass in type(exc).__mro__:
            handler = self._handlers.get(klass)
            if handler is not None:
                return handler
        return None

    def run(self, command: Command, args: argparse.Namespace, context: RunContext) -> int:
        logger = get_logger(__name__, context)
        try:
            command(args, context)
        except Exception as exc:
            handler = self.resolve(exc)
            if handler is None:
                raise
            return int(handler(context, exc))
        logger.info("Command finished")
        return int(ExitCode.OK)
