from app.utils.compat import StrEnum
import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from typing import ClassVar
from typing_extensions import Self

from app.schemas.sensor import SensorConfig

FloatArray = npt.NDArray[np.float64]
BoolArray = npt.NDArray[np.bool_]


def _as_float_array(v: object) -> FloatArray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError("must be a one-dimensional sequence")
    return arr


# Phase time series (rad)
class PhaseTrace(BaseModel):
    samples: FloatArray
    sample_rate: float
    # False marks bins without a usable estimate (their sample is NaN)
    valid: BoolArray | None = None

    model_config: ClassVar[ConfigDict] = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @field_validator("samples", mode="before")
    @classmethod
    def to_array(cls, v: object) -> FloatArray:
        return _as_float_array(v)

    @field_validator("valid", mode="before")
    @classmethod
    def to_mask(cls, v: object) -> BoolArray | None:
        if v is None:
            return None
        return np.asarray(v, dtype=np.bool_)

    @field_validator("sample_rate")
    @classmethod
    def positive_rate(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("sample_rate must be > 0")
        return v

    @model_validator(mode="after")
    def finite_samples(self) -> Self:
        mask = self.mask()
        if mask.shape != self.samples.shape:
            raise ValueError("valid mask must match samples length")
        if not np.all(np.isfinite(self.samples[mask])):
            raise ValueError("samples must be finite")
        return self

    def mask(self) -> BoolArray:
        if self.valid is None:
            return np.ones(self.samples.shape, dtype=np.bool_)
        return self.valid

    @property
    def invalid_count(self) -> int:
        return int(np.count_nonzero(~self.mask()))

    def __len__(self) -> int:
        return int(self.samples.size)


# Paired detector counts per sample bin
class DetectorRecord(BaseModel):
    i_plus: npt.NDArray[np.int64] | FloatArray
    i_minus: npt.NDArray[np.int64] | FloatArray
    sample_rate: float
    config_snapshot: SensorConfig
    seed: int

    model_config: ClassVar[ConfigDict] = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @field_validator("i_plus", "i_minus", mode="before")
    @classmethod
    def to_counts(cls, v: object) -> npt.NDArray[np.int64] | FloatArray:
        arr = np.asarray(v)
        if arr.ndim != 1:
            raise ValueError("counts must be a one-dimensional sequence")
        if np.issubdtype(arr.dtype, np.integer):
            arr = arr.astype(np.int64)
        else:
            arr = arr.astype(np.float64)
        if arr.size and np.min(arr) < 0:
            raise ValueError("counts must be >= 0")
        return arr

    @field_validator("sample_rate")
    @classmethod
    def positive_rate(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("sample_rate must be > 0")
        return v

    @model_validator(mode="after")
    def equal_lengths(self) -> Self:
        if self.i_plus.shape != self.i_minus.shape:
            raise ValueError("i_plus and i_minus must have equal lengths")
        return self

    def __len__(self) -> int:
        return int(self.i_plus.size)


class NoiseSpectrumKind(StrEnum):
    WHITE = "white"
    ONE_OVER_F = "one_over_f"


# Multiplicative pump-power noise
class CommonModeNoise(BaseModel):
    relative_amplitude: float = 0.0
    spectrum: NoiseSpectrumKind = NoiseSpectrumKind.WHITE
    seed: int = 0

    model_config: ClassVar[ConfigDict] = ConfigDict(frozen=True, extra="forbid")

    @field_validator("relative_amplitude")
    @classmethod
    def non_negative(cls, v: float) -> float:
        if v < 0:
            raise ValueError("relative_amplitude must be >= 0")
        return v


class FringeSweep(BaseModel):
    """Noiseless difference signal (counts/s) against displacement."""
    displacement_nm: FloatArray
    phase_rad: FloatArray
    difference: FloatArray
    total_rate: float
    fringe_count: float

    model_config: ClassVar[ConfigDict] = ConfigDict(frozen=True, arbitrary_types_allowed=True)
