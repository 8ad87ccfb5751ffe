from pydantic import BaseModel, field_validator, model_validator
from typing_extensions import Self


# One fixed-volume block of sentences
class Trial(BaseModel):
    volume_db_spl: float
    fraction_correct: float
    word_count: int

    @field_validator("fraction_correct")
    @classmethod
    def fraction_range(cls, v: float) -> float:
        if not 0 <= v <= 1:
            raise ValueError("fraction_correct must be in [0, 1]")
        return v

    @field_validator("word_count")
    @classmethod
    def positive_count(cls, v: int) -> int:
        if v <= 0:
            raise ValueError("word_count must be > 0")
        return v


class FitMeta(BaseModel):
    iterations: int
    converged: bool
    residual: float
    log_likelihood: float


class PsychometricFit(BaseModel):
    srt: float
    slope: float
    fit_meta: FitMeta

    @field_validator("slope")
    @classmethod
    def positive_slope(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("slope must be > 0")
        return v


class SubjectSrt(BaseModel):
    subject: str
    srt_classical: float
    srt_quantum: float

    @property
    def difference(self) -> float:
        return self.srt_quantum - self.srt_classical


class SrtResult(BaseModel):
    per_subject: list[SubjectSrt]
    n: int

    @model_validator(mode="after")
    def consistent_count(self) -> Self:
        if self.n != len(self.per_subject):
            raise ValueError("n must equal the number of subjects")
        return self

    @classmethod
    def from_subjects(cls, subjects: list[SubjectSrt]) -> "SrtResult":
        return cls(per_subject=subjects, n=len(subjects))

    def differences(self) -> list[float]:
        return [s.difference for s in self.per_subject]


class PairedStats(BaseModel):
    n: int
    mean_diff: float
    sd: float
    sem: float
    ci95: float
    t_statistic: float
    p_value: float
    p_value_two_sided: float
    fraction_improved: float


class HistogramBin(BaseModel):
    left: float
    right: float
    count: int
