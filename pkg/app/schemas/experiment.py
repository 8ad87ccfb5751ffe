import math
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing import ClassVar
from typing_extensions import Self

from app.schemas.audio import MembraneModel, SnrFit
from app.schemas.detection import NoiseSpectrumKind
from app.schemas.sensor import Scheme, SensorConfig, classical_default, quantum_default
from app.schemas.spectral import Band, WindowMeta

_STRICT: ConfigDict = ConfigDict(extra="forbid")


class SensorPair(BaseModel):
    classical: SensorConfig = Field(default_factory=classical_default)
    quantum: SensorConfig = Field(default_factory=quantum_default)

    model_config: ClassVar[ConfigDict] = _STRICT

    @model_validator(mode="after")
    def schemes_match(self) -> Self:
        if self.classical.scheme != Scheme.CLASSICAL:
            raise ValueError("sensors.classical must have scheme 'classical'")
        if self.quantum.scheme != Scheme.QUANTUM:
            raise ValueError("sensors.quantum must have scheme 'quantum'")
        return self

    def for_scheme(self, scheme: Scheme) -> SensorConfig:
        return self.classical if scheme == Scheme.CLASSICAL else self.quantum


class NoiseSettings(BaseModel):
    relative_amplitude: float = 0.0
    spectrum: NoiseSpectrumKind = NoiseSpectrumKind.WHITE

    model_config: ClassVar[ConfigDict] = _STRICT

    @field_validator("relative_amplitude")
    @classmethod
    def non_negative(cls, v: float) -> float:
        if v < 0:
            raise ValueError("relative_amplitude must be >= 0")
        return v


class DetectionSettings(BaseModel):
    sample_rate_hz: float = 100_000.0
    n_bins: int = 1 << 20
    operating_point_rad: float = math.pi / 2
    # 1 = per-bin sum normalisation (full common-mode rejection)
    reference_window: int = 1
    # unmodulated benchmark traces at quadrature: smoothing keeps rejection there
    benchmark_reference_window: int = 64
    chunk_size: int = 1 << 16

    model_config: ClassVar[ConfigDict] = _STRICT

    @field_validator("sample_rate_hz")
    @classmethod
    def positive_rate(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("sample_rate_hz must be > 0")
        return v

    @field_validator("n_bins", "reference_window", "benchmark_reference_window", "chunk_size")
    @classmethod
    def positive_int(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be >= 1")
        return v


class SweepSettings(BaseModel):
    d_min_nm: float = 0.0
    d_max_nm: float = 1064.0
    steps: int = 2001

    model_config: ClassVar[ConfigDict] = _STRICT

    @field_validator("steps")
    @classmethod
    def at_least_two(cls, v: int) -> int:
        if v < 2:
            raise ValueError("steps must be >= 2")
        return v

    @model_validator(mode="after")
    def ordered(self) -> Self:
        if not self.d_max_nm > self.d_min_nm:
            raise ValueError("d_max_nm must be > d_min_nm")
        return self


def _default_sub_bands() -> list[Band]:
    edges = [200.0, 1_000.0, 5_000.0, 10_000.0, 20_000.0, 35_000.0, 50_000.0]
    return [Band(low=lo, high=hi) for lo, hi in zip(edges[:-1], edges[1:])]


class SpectralSettings(BaseModel):
    window: WindowMeta = WindowMeta()
    fit_band_low_hz: float = 200.0
    # None -> Nyquist of the simulated record
    fit_band_high_hz: float | None = None
    sub_bands: list[Band] = Field(default_factory=_default_sub_bands)
    bootstrap_samples: int = 200

    model_config: ClassVar[ConfigDict] = _STRICT

    @field_validator("bootstrap_samples")
    @classmethod
    def positive_samples(cls, v: int) -> int:
        if v < 1:
            raise ValueError("bootstrap_samples must be >= 1")
        return v

    def fit_band(self, sample_rate: float) -> Band:
        high = self.fit_band_high_hz if self.fit_band_high_hz is not None else sample_rate / 2
        return Band(low=self.fit_band_low_hz, high=high)


class AudioSettings(BaseModel):
    # CSV `file, volume_db_spl, scheme, seed`; None -> synthetic 22-step grid
    manifest: str | None = None
    sample_rate_hz: float = 20_000.0
    stimulus_duration_s: float = 10.0
    stimulus_peak: float = 0.5
    volume_start_db_spl: float = 46.0
    volume_step_db: float = 1.0
    volume_steps: int = 22
    record_volume_db_spl: float = 80.0
    linear_limit_rad: float = 0.3
    # photon rate of both microphones during recording (the benchmark rate buries speech in shot noise)
    photon_rate_R: float = 2.14e9
    wav_dir: str = "wav"

    model_config: ClassVar[ConfigDict] = _STRICT

    @field_validator(
        "sample_rate_hz", "stimulus_duration_s", "volume_step_db", "linear_limit_rad", "photon_rate_R"
    )
    @classmethod
    def positive(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("must be > 0")
        return v

    @field_validator("stimulus_peak")
    @classmethod
    def peak_range(cls, v: float) -> float:
        if not 0 < v <= 1:
            raise ValueError("stimulus_peak must be in (0, 1]")
        return v

    @field_validator("volume_steps")
    @classmethod
    def enough_steps(cls, v: int) -> int:
        if v < 3:
            raise ValueError("volume_steps must be >= 3")
        return v


def _reported_snr(beta: float) -> SnrFit:
    return SnrFit(alpha=0.95, beta=beta, residual=0.0)


class ListenerSettings(BaseModel):
    ref_snr_mean_db: float = -7.0
    ref_snr_sd_db: float = 1.0
    # logistic slope per dB of SNR
    slope_per_db: float = 0.6
    # test-retest variability of one OLSA round
    session_sd_db: float = 0.9
    sentences: int = 30
    words_per_sentence: int = 5
    volume_points: int = 6
    volume_span_db: float = 12.0

    model_config: ClassVar[ConfigDict] = _STRICT

    @field_validator("ref_snr_sd_db", "session_sd_db")
    @classmethod
    def non_negative(cls, v: float) -> float:
        if v < 0:
            raise ValueError("must be >= 0")
        return v

    @field_validator("slope_per_db", "volume_span_db")
    @classmethod
    def positive(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("must be > 0")
        return v

    @field_validator("volume_points")
    @classmethod
    def enough_volumes(cls, v: int) -> int:
        if v < 4:
            raise ValueError("volume_points must be >= 4")
        return v

    @model_validator(mode="after")
    def sentences_cover_volumes(self) -> Self:
        if self.sentences < self.volume_points:
            raise ValueError("sentences must be >= volume_points")
        return self


class StatsSettings(BaseModel):
    # CSV `subject, srt_classical_db, srt_quantum_db`; None -> synthetic listeners
    input_csv: str | None = None
    # snr_fit.csv from record-batch; None -> snr_classical / snr_quantum
    snr_fit_csv: str | None = None
    n_subjects: int = 45
    snr_classical: SnrFit = Field(default_factory=lambda: _reported_snr(6.20))
    snr_quantum: SnrFit = Field(default_factory=lambda: _reported_snr(7.04))
    listener: ListenerSettings = ListenerSettings()
    histogram_bin_width_db: float = 0.5
    alpha: float = 0.05
    # 0 disables the Monte Carlo power check
    power_replications: int = 0

    model_config: ClassVar[ConfigDict] = _STRICT

    @field_validator("n_subjects")
    @classmethod
    def at_least_two(cls, v: int) -> int:
        if v < 2:
            raise ValueError("n_subjects must be >= 2")
        return v

    @field_validator("histogram_bin_width_db")
    @classmethod
    def positive_width(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("histogram_bin_width_db must be > 0")
        return v

    @field_validator("alpha")
    @classmethod
    def alpha_range(cls, v: float) -> float:
        if not 0 < v < 1:
            raise ValueError("alpha must be in (0, 1)")
        return v

    @field_validator("power_replications")
    @classmethod
    def non_negative(cls, v: int) -> int:
        if v < 0:
            raise ValueError("power_replications must be >= 0")
        return v


class ExperimentConfig(BaseModel):
    seed: int = 20231
    output_dir: str = "results"
    sensors: SensorPair = SensorPair()
    noise: NoiseSettings = NoiseSettings()
    detection: DetectionSettings = DetectionSettings()
    sweep: SweepSettings = SweepSettings()
    spectral: SpectralSettings = SpectralSettings()
    membrane: MembraneModel = MembraneModel()
    audio: AudioSettings = AudioSettings()
    stats: StatsSettings = StatsSettings()

    model_config: ClassVar[ConfigDict] = _STRICT

    @field_validator("seed")
    @classmethod
    def non_negative_seed(cls, v: int) -> int:
        if v < 0:
            raise ValueError("seed must be >= 0")
        return v
