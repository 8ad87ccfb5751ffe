import uuid
from pydantic import BaseModel, ConfigDict, Field
from typing import ClassVar


class RunContext(BaseModel):
    """Per-invocation metadata attached to log records and error envelopes."""

    command: str = "-"
    seed: int | None = None
    run_id: str = Field(default_factory=lambda: uuid.uuid4().hex[:12])

    model_config: ClassVar[ConfigDict] = ConfigDict(frozen=True)
