import math
from app.utils.compat import StrEnum
from pydantic import BaseModel, ConfigDict, model_validator
from typing import ClassVar
from typing_extensions import Self

NORM_TOLERANCE = 1e-12


class Basis(StrEnum):
    """signal (x) idler polarization basis after path overlap."""
    VV = "V_s*V_i"
    HV = "H_s*V_i"
    VH = "V_s*H_i"
    HH = "H_s*H_i"


class PairTag(StrEnum):
    FORWARD = "forward"
    BACKWARD = "backward"
    OVERLAPPED = "overlapped"


class TwoPhotonState(BaseModel):
    amplitudes: dict[Basis, complex]
    tag: PairTag

    model_config: ClassVar[ConfigDict] = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def normalized(self) -> Self:
        norm = math.fsum(abs(a) ** 2 for a in self.amplitudes.values())
        if abs(norm - 1.0) >= NORM_TOLERANCE:
            raise ValueError(f"state must be normalized, got sum |a|^2 = {norm!r}")
        return self

    def amplitude(self, basis: Basis) -> complex:
        return self.amplitudes.get(basis, 0j)

    def norm(self) -> float:
        return math.fsum(abs(a) ** 2 for a in self.amplitudes.values())
