import math
import numpy as np
import pytest

from app.schemas.audio import SnrFit
from app.schemas.experiment import (
    AudioSettings,
    DetectionSettings,
    ExperimentConfig,
    StatsSettings,
    SweepSettings,
)
from app.schemas.sensor import SensorConfig, classical_default, quantum_default
from app.schemas.srt import SrtResult, SubjectSrt

# Reported population: n = 45, mean -0.57, sd 1.45, 71% improved
REPORTED_N = 45
REPORTED_MEAN = -0.57
REPORTED_SD = 1.45
REPORTED_IMPROVED = 32


def two_cluster_differences(
    n: int = REPORTED_N,
    n_negative: int = REPORTED_IMPROVED,
    mean: float = REPORTED_MEAN,
    sd: float = REPORTED_SD,
) -> np.ndarray:
    """
    n_negative values at u < 0 and the rest at v > 0 with exactly the
    requested sample mean and sd (ddof=1).
    """
    n_positive = n - n_negative
    # deviations a (negative group) and b (positive group) around the mean
    spread = sd * math.sqrt((n - 1) / n)
    a = -spread * math.sqrt(n_positive / n_negative)
    b = spread * math.sqrt(n_negative / n_positive)
    values = np.concatenate([np.full(n_negative, mean + a), np.full(n_positive, mean + b)])
    return values


def result_from_differences(differences: np.ndarray) -> SrtResult:
    subjects = [
        SubjectSrt(subject=f"S{i + 1:02d}", srt_classical=0.0, srt_quantum=float(d))
        for i, d in enumerate(differences)
    ]
    return SrtResult.from_subjects(subjects)


@pytest.fixture
def classical_sensor() -> SensorConfig:
    """Ideal classical sensor at the benchmark photon rate."""
    return classical_default()


@pytest.fixture
def quantum_sensor() -> SensorConfig:
    """Quantum sensor at eta_int = 0.74, visibility 0.85."""
    return quantum_default()


@pytest.fixture
def reported_snr_models() -> tuple[SnrFit, SnrFit]:
    return (
        SnrFit(alpha=0.95, beta=6.20, residual=0.0),
        SnrFit(alpha=0.95, beta=7.04, residual=0.0),
    )


@pytest.fixture
def reported_population() -> SrtResult:
    """45 differences with mean -0.57, sd 1.45 and 32 of 45 below zero."""
    return result_from_differences(two_cluster_differences())


@pytest.fixture
def small_config(tmp_path) -> ExperimentConfig:
    """Defaults scaled down so every command finishes in seconds."""
    return ExperimentConfig(
        seed=7,
        output_dir=str(tmp_path / "results"),
        detection=DetectionSettings(n_bins=1 << 15, chunk_size=1 << 12),
        sweep=SweepSettings(steps=201),
        audio=AudioSettings(stimulus_duration_s=0.5, volume_steps=4),
        stats=StatsSettings(n_subjects=12),
    )


@pytest.fixture
def config_file(tmp_path, small_config):
    """small_config written as JSON."""
    path = tmp_path / "experiment.json"
    _ = path.write_text(small_config.model_dump_json(indent=2), encoding="utf-8")
    return path
