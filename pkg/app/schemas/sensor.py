from app.utils.compat import StrEnum
from pydantic import BaseModel, ConfigDict, field_validator
from typing import ClassVar


class Scheme(StrEnum):
    CLASSICAL = "classical"
    QUANTUM = "quantum"


# Physical parameters of one sensor
class SensorConfig(BaseModel):
    scheme: Scheme = Scheme.CLASSICAL
    lambda_pump: float = 532.0
    lambda_signal: float = 1109.0
    lambda_idler: float = 1023.0
    lambda_classical: float = 1064.0
    photon_rate_R: float = 2.14e6
    eta_ext: float = 1.0
    eta_int: float = 1.0
    visibility: float = 1.0
    pair_flux: float = 1.65e8
    parametric_threshold: float = 7.02e12
    dark_count_rate: float = 0.0

    model_config: ClassVar[ConfigDict] = ConfigDict(frozen=True, extra="forbid")

    @field_validator(
        "lambda_pump",
        "lambda_signal",
        "lambda_idler",
        "lambda_classical",
        "photon_rate_R",
        "pair_flux",
        "parametric_threshold",
    )
    @classmethod
    def strictly_positive(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("must be > 0")
        return v

    @field_validator("eta_ext", "eta_int")
    @classmethod
    def efficiency_range(cls, v: float) -> float:
        if not 0 < v <= 1:
            raise ValueError("efficiency must be in (0, 1]")
        return v

    @field_validator("visibility")
    @classmethod
    def visibility_range(cls, v: float) -> float:
        if not 0 <= v <= 1:
            raise ValueError("visibility must be in [0, 1]")
        return v

    @field_validator("dark_count_rate")
    @classmethod
    def non_negative(cls, v: float) -> float:
        if v < 0:
            raise ValueError("dark_count_rate must be >= 0")
        return v


def classical_default() -> SensorConfig:
    """Ideal classical Michelson at the pair mean wavelength."""
    return SensorConfig(scheme=Scheme.CLASSICAL)


def quantum_default() -> SensorConfig:
    """Quantum sensor at the lower bound of the internal transmissivity."""
    return SensorConfig(scheme=Scheme.QUANTUM, eta_int=0.74, visibility=0.85)
