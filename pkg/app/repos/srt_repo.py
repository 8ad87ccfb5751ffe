from pathlib import Path
import pandas as pd

from app.core.errors import ConfigError
from app.repos.results_repo import write_csv
from app.schemas.srt import HistogramBin, PairedStats, SrtResult, SubjectSrt

INPUT_COLUMNS = ["subject", "srt_classical_db", "srt_quantum_db"]


class SrtRepository:
    @staticmethod
    # Load per-subject SRTs (user data)
    def load(path: Path) -> SrtResult:
        frame = pd.read_csv(path, skipinitialspace=True, dtype={"subject": str})
        missing = [c for c in INPUT_COLUMNS if c not in frame.columns]
        if missing:
            raise ConfigError(
                f"{path} is missing columns: {', '.join(missing)}",
                details={"path": str(path), "missing": missing},
            )
        if frame[INPUT_COLUMNS[1:]].isna().any().any():
            raise ConfigError(f"{path} has empty SRT cells", details={"path": str(path)})

        subjects = [
            SubjectSrt(
                subject=str(row.subject),
                srt_classical=float(row.srt_classical_db),
                srt_quantum=float(row.srt_quantum_db),
            )
            for row in frame.itertuples(index=False)
        ]
        return SrtResult.from_subjects(subjects)

    @staticmethod
    # Per-subject SRTs plus the difference column
    def save_subjects(path: Path, results: SrtResult) -> Path:
        frame = pd.DataFrame(
            [
                {
                    "subject": s.subject,
                    "srt_classical_db": s.srt_classical,
                    "srt_quantum_db": s.srt_quantum,
                    "difference_db": s.difference,
                }
                for s in results.per_subject
            ],
            columns=[*INPUT_COLUMNS, "difference_db"],
        )
        return write_csv(frame, path)

    @staticmethod
    def save_report(path: Path, paired: PairedStats, extra: dict[str, float] | None = None) -> Path:
        row: dict[str, float] = {**paired.model_dump(), **(extra or {})}
        return write_csv(pd.DataFrame([row]), path)

    @staticmethod
    def save_histogram(path: Path, bins: list[HistogramBin]) -> Path:
        frame = pd.DataFrame([b.model_dump() for b in bins], columns=["left", "right", "count"])
        return write_csv(frame, path)
