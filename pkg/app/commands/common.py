import argparse
from pathlib import Path

from app.core.config import load_experiment_config
from app.schemas.experiment import ExperimentConfig


def add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="experiment JSON file (defaults: reported benchmark values)")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out-dir", type=Path, default=None, help="override the config output directory")


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Config file plus --seed / --out-dir overrides (re-validated)."""
    config = load_experiment_config(args.config)
    updates: dict[str, object] = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.out_dir is not None:
        updates["output_dir"] = str(args.out_dir)
    if not updates:
        return config
    return ExperimentConfig.model_validate({**config.model_dump(), **updates})


def output_dir(config: ExperimentConfig) -> Path:
    path = Path(config.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path
