from functools import lru_cache
from pathlib import Path
from pydantic_settings import BaseSettings, SettingsConfigDict
from typing import ClassVar

from app.core.errors import ConfigError
from app.schemas.experiment import ExperimentConfig


class Settings(BaseSettings):
    PROJECT_NAME: str = "Quantum Microphone Simulator"
    LOG_LEVEL: str = "INFO"

    OUTPUT_DIR: str = "results"
    MAX_WORKERS: int = 1
    DEFAULT_SEED: int = 20231

    model_config: ClassVar[SettingsConfigDict] = SettingsConfigDict(
        env_file=".env",
        case_sensitive=True,
        extra="allow",
    )

@lru_cache()
def get_settings() -> Settings:
    return Settings()


settings = get_settings()


def load_experiment_config(path: str | Path | None) -> ExperimentConfig:
    """
    Load and validate an experiment file (JSON).
    No path -> all defaults (reported benchmark values), seed/output dir from settings.
    """
    if path is None:
        return ExperimentConfig(seed=settings.DEFAULT_SEED, output_dir=settings.OUTPUT_DIR)

    config_path = Path(path)
    if not config_path.is_file():
        raise ConfigError(f"config file not found: {config_path}", details={"path": str(config_path)})

    # ValidationError propagates; the registered handler serializes field errors
    return ExperimentConfig.model_validate_json(config_path.read_text(encoding="utf-8"))
