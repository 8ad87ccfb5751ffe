import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from typing import ClassVar
from typing_extensions import Self

from app.schemas.detection import FloatArray


class WindowMeta(BaseModel):
    # None -> largest power of two giving >= min_averages segments
    segment_length: int | None = None
    overlap: float = 0.5
    window: str = "hann"
    min_averages: int = 16

    model_config: ClassVar[ConfigDict] = ConfigDict(frozen=True, extra="forbid")

    @field_validator("segment_length")
    @classmethod
    def power_of_two(cls, v: int | None) -> int | None:
        if v is not None and (v < 16 or v & (v - 1)):
            raise ValueError("segment_length must be a power of two >= 16")
        return v

    @field_validator("overlap")
    @classmethod
    def overlap_range(cls, v: float) -> float:
        if not 0 <= v < 1:
            raise ValueError("overlap must be in [0, 1)")
        return v

    @field_validator("min_averages")
    @classmethod
    def at_least_two(cls, v: int) -> int:
        if v < 2:
            raise ValueError("min_averages must be >= 2")
        return v


class Band(BaseModel):
    low: float
    high: float

    model_config: ClassVar[ConfigDict] = ConfigDict(frozen=True, extra="forbid")

    @model_validator(mode="after")
    def ordered(self) -> Self:
        if not 0 <= self.low < self.high:
            raise ValueError("band must satisfy 0 <= low < high")
        return self

    def __str__(self) -> str:
        return f"[{self.low:g}, {self.high:g}] Hz"


class NoiseSpectrum(BaseModel):
    frequencies: FloatArray
    amplitude: FloatArray
    window_meta: WindowMeta
    sample_rate: float
    segment_length: int
    averages: int

    model_config: ClassVar[ConfigDict] = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @field_validator("frequencies", "amplitude", mode="before")
    @classmethod
    def to_array(cls, v: object) -> FloatArray:
        return np.asarray(v, dtype=np.float64)

    @model_validator(mode="after")
    def well_formed(self) -> Self:
        if self.frequencies.shape != self.amplitude.shape:
            raise ValueError("frequencies and amplitude must have equal lengths")
        if self.frequencies.size and self.frequencies[0] <= 0:
            raise ValueError("frequencies must be positive")
        if np.any(np.diff(self.frequencies) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        if np.any(self.amplitude < 0):
            raise ValueError("amplitudes must be non-negative")
        return self

    @property
    def resolution(self) -> float:
        return float(self.sample_rate / self.segment_length)


class FloorFit(BaseModel):
    amplitude: float
    uncertainty: float
    band: Band
    bins_used: int
    bins_rejected: int


class EnhancementReport(BaseModel):
    amplitude_ratio: float
    variance_ratio: float
    band: Band
    classical_excess_over_snl: float
    classical_floor: FloorFit
    quantum_floor: FloorFit
    snl_floor: float

    @model_validator(mode="after")
    def consistent(self) -> Self:
        if abs(self.variance_ratio - self.amplitude_ratio ** 2) > 1e-9:
            raise ValueError("variance_ratio must equal amplitude_ratio squared")
        return self


class BandRatio(BaseModel):
    band: Band
    classical_floor: float
    quantum_floor: float
    ratio: float
