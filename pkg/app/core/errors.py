from __future__ import annotations

import sys
from collections.abc import Mapping, Sequence
from enum import IntEnum
from typing import TYPE_CHECKING, Any, cast
from pydantic import BaseModel, ValidationError

from app.core.context import RunContext
from app.core.logging import get_logger

if TYPE_CHECKING:
    from app.core.runner import CommandRunner


class ExitCode(IntEnum):
    OK = 0
    UNEXPECTED = 1
    CONFIG_ERROR = 2
    NUMERICAL_FAILURE = 3


class SimulationError(Exception):
    """Base class of all simulator errors."""

    error_type: str = "simulation_error"

    def __init__(self, message: str, details: dict[str, object] | None = None):
        super().__init__(message)
        self.message: str = message
        self.details: dict[str, object] | None = details


class ContractViolationError(SimulationError):
    """An operation was called on a state it is not defined for."""

    error_type = "contract_violation"


class DomainError(SimulationError, ValueError):
    """Input outside the domain of an operation (range, length, band)."""

    error_type = "domain_error"


class ConfigError(SimulationError):
    error_type = "config_error"


class NumericalError(SimulationError):
    """Optimisation or estimation did not converge."""

    error_type = "numerical_failure"


class PsychometricFitError(NumericalError):
    error_type = "psychometric_fit_failure"


class ErrorBody(BaseModel):
    """Structured error body."""
    type: str
    message: str
    details: dict[str, object] | None = None


class ErrorEnvelope(BaseModel):
    error: ErrorBody
    meta: dict[str, object]


def _build_meta(context: RunContext) -> dict[str, object]:
    """Collect metadata for error records."""
    return {
        "run_id": context.run_id,
        "command": context.command,
        "seed": context.seed if context.seed is not None else "-",
    }

def _serialize_validation_errors(errors: Sequence[Mapping[Any, Any]]) -> list[dict[str, object]]:
    """Serialize validation errors, handling non-serializable objects in context."""

    serialized_errors: list[dict[str, object]] = []

    for error in errors:
        serialized_error: dict[str, object] = dict(error)
        # input values may be numpy arrays or other non-JSON objects
        _ = serialized_error.pop("input", None)
        _ = serialized_error.pop("url", None)

        if "loc" in serialized_error and isinstance(serialized_error["loc"], (list, tuple)):
            loc = cast(Sequence[object], serialized_error["loc"])
            serialized_error["field"] = ".".join(str(part) for part in loc)

        if "ctx" in serialized_error and isinstance(serialized_error["ctx"], dict):
            ctx: dict[str, object] = cast(dict[str, object], serialized_error["ctx"]).copy()

            if "error" in ctx:
                error_value = ctx["error"]

                if hasattr(error_value, "__str__"):
                    ctx["error"] = str(error_value)
            serialized_error["ctx"] = ctx
        serialized_errors.append(serialized_error)
    return serialized_errors


def emit_error(context: RunContext, body: ErrorBody) -> None:
    """Write one machine-readable error record to stderr."""
    envelope = ErrorEnvelope(error=body, meta=_build_meta(context))
    _ = sys.stderr.write(envelope.model_dump_json() + "\n")
    _ = sys.stderr.flush()


def register_exception_handlers(runner: CommandRunner) -> None:
    """Register centralized exception -> exit code mapping."""

    @runner.exception_handler(ValidationError)
    def validation_exception_handler(context: RunContext, exc: ValidationError) -> ExitCode:
        logger = get_logger(__name__, context)
        errors = _serialize_validation_errors(exc.errors())
        fields = ", ".join(str(e.get("field", "-")) for e in errors)
        logger.info("Validation error: %s", fields)
        message = "; ".join(f"{e.get('field', '-')}: {e.get('msg', '')}" for e in errors)
        emit_error(
            context,
            ErrorBody(
                type="validation_error",
                message=message or "Invalid configuration",
                details={"errors": errors},
            ),
        )
        return ExitCode.CONFIG_ERROR

    @runner.exception_handler(ConfigError)
    @runner.exception_handler(DomainError)
    def input_error_handler(context: RunContext, exc: SimulationError) -> ExitCode:
        logger = get_logger(__name__, context)
        logger.warning("Input error: %s", exc.message)
        emit_error(context, ErrorBody(type=exc.error_type, message=exc.message, details=exc.details))
        return ExitCode.CONFIG_ERROR

    @runner.exception_handler(FileNotFoundError)
    def missing_file_handler(context: RunContext, exc: FileNotFoundError) -> ExitCode:
        logger = get_logger(__name__, context)
        logger.warning("Missing file: %s", exc.filename)
        emit_error(
            context,
            ErrorBody(
                type="file_not_found",
                message=f"file not found: {exc.filename}",
                details={"path": str(exc.filename)},
            ),
        )
        return ExitCode.CONFIG_ERROR

    @runner.exception_handler(NumericalError)
    def numerical_error_handler(context: RunContext, exc: NumericalError) -> ExitCode:
        logger = get_logger(__name__, context)
        logger.error("Numerical failure: %s", exc.message)
        emit_error(context, ErrorBody(type=exc.error_type, message=exc.message, details=exc.details))
        return ExitCode.NUMERICAL_FAILURE

    @runner.exception_handler(Exception)
    def unhandled_exception_handler(context: RunContext, exc: Exception) -> ExitCode:
        logger = get_logger(__name__, context)
        logger.exception("Unhandled error", exc_info=exc)
        emit_error(context, ErrorBody(type="internal_error", message=str(exc) or type(exc).__name__))
        return ExitCode.UNEXPECTED
