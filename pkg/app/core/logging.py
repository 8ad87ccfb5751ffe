from __future__ import annotations
import logging
import sys
from typing import Final
from logging import LoggerAdapter, LogRecord
from typing_extensions import override

from app.core.context import RunContext

_LOG_FORMAT: Final[str] = (
    "%(asctime)s %(levelname)s %(name)s :: %(message)s "
    "[run=%(run_id)s cmd=%(command)s]"
)


class RunLogFilter(logging.Filter):
    """
    Ensures every record has run_id and command keys.
    """

    @override
    def filter(self, record: LogRecord) -> bool:
        if not hasattr(record, "run_id"):
            record.run_id = "-"
        if not hasattr(record, "command"):
            record.command = "-"
        return True


def setup_logging(level: int | str = logging.INFO) -> None:
    """
    Configure the root logger (run_id/command) on stderr.
    Stdout is left to the command summaries.
    """
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
        if not isinstance(level, int):
            level = logging.INFO

    handler = logging.StreamHandler(sys.stderr)
    handler.setLevel(level)
    handler.addFilter(RunLogFilter())
    handler.setFormatter(logging.Formatter(_LOG_FORMAT))

    root = logging.getLogger()
    root.handlers.clear()
    root.setLevel(level)
    root.addHandler(handler)


def get_logger(
    name: str,
    context: RunContext | None = None
) -> LoggerAdapter[logging.Logger]:
    """
    Attach run context (run_id, command).
    Usage: logger = get_logger(__name__, context)
    """
    extra: dict[str, str] = {}
    if context is not None:
        extra["run_id"] = context.run_id
        extra["command"] = context.command
    return LoggerAdapter(logging.getLogger(name), extra)
