import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from typing import ClassVar
from typing_extensions import Self

from app.schemas.detection import FloatArray
from app.schemas.sensor import Scheme

P_REF_PA = 20e-6


class AudioSignal(BaseModel):
    """
    PCM waveform in [-1, 1].
    Played at volume V_A, a sample x corresponds to the pressure
    x * P_REF * 10**((V_A - spl_reference) / 20).
    """
    samples: FloatArray
    sample_rate: float
    spl_reference: float = 0.0

    model_config: ClassVar[ConfigDict] = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @field_validator("samples", mode="before")
    @classmethod
    def to_array(cls, v: object) -> FloatArray:
        arr = np.asarray(v, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError("samples must be mono (one-dimensional)")
        return arr

    @field_validator("sample_rate")
    @classmethod
    def positive_rate(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("sample_rate must be > 0")
        return v

    @model_validator(mode="after")
    def within_full_scale(self) -> Self:
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")
        if self.samples.size and np.max(np.abs(self.samples)) > 1.0:
            raise ValueError("samples must lie within [-1, 1]")
        return self

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def __len__(self) -> int:
        return int(self.samples.size)


class Resonance(BaseModel):
    frequency_hz: float
    q: float

    model_config: ClassVar[ConfigDict] = ConfigDict(frozen=True, extra="forbid")

    @field_validator("frequency_hz", "q")
    @classmethod
    def positive(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("must be > 0")
        return v


class MembraneResponse(BaseModel):
    flat_band_edge_hz: float = 15000.0
    resonance: Resonance | None = None

    model_config: ClassVar[ConfigDict] = ConfigDict(frozen=True, extra="forbid")

    @field_validator("flat_band_edge_hz")
    @classmethod
    def positive_edge(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("flat_band_edge_hz must be > 0")
        return v


# Glass membrane with glued mirror
class MembraneModel(BaseModel):
    diameter_mm: float = 12.7
    thickness_um: float = 70.0
    # free calibration: 60 dB_SPL full scale -> ~0.1 rad classical peak phase
    gain_nm_per_pa: float = 420.0
    response: MembraneResponse = MembraneResponse()

    model_config: ClassVar[ConfigDict] = ConfigDict(frozen=True, extra="forbid")

    @field_validator("diameter_mm", "thickness_um")
    @classmethod
    def positive_size(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("must be > 0")
        return v

    @field_validator("gain_nm_per_pa")
    @classmethod
    def positive_gain(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("gain_nm_per_pa must be > 0")
        return v


class SnrFit(BaseModel):
    alpha: float
    beta: float
    residual: float
    alpha_stderr: float = 0.0
    beta_stderr: float = 0.0
    points: int = 0

    @field_validator("points")
    @classmethod
    def enough_points(cls, v: int) -> int:
        if 0 < v < 3:
            raise ValueError("fit requires >= 3 volume points")
        return v

    def snr_at(self, volume_db_spl: float) -> float:
        return self.alpha * volume_db_spl + self.beta


class LinearityReport(BaseModel):
    peak_phase_rad: float
    limit_rad: float
    clipped_fraction: float

    @property
    def violated(self) -> bool:
        return self.peak_phase_rad >= self.limit_rad


# One row of the batch manifest
class BatchItem(BaseModel):
    file: str
    volume_db_spl: float
    scheme: Scheme
    seed: int


class BatchResult(BaseModel):
    file: str
    scheme: Scheme
    volume: float
    snr_db: float
