from pathlib import Path
import pandas as pd
from pydantic import ValidationError

from app.core.errors import ConfigError
from app.repos.results_repo import write_csv
from app.schemas.audio import BatchItem, BatchResult, SnrFit
from app.schemas.sensor import Scheme

MANIFEST_COLUMNS = ["file", "volume_db_spl", "scheme", "seed"]
RESULT_COLUMNS = ["file", "scheme", "volume", "snr_db"]
FIT_COLUMNS = ["scheme", "alpha", "alpha_stderr", "beta", "beta_stderr", "residual", "points"]


def _require_columns(frame: pd.DataFrame, columns: list[str], path: Path) -> None:
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ConfigError(
            f"{path} is missing columns: {', '.join(missing)}",
            details={"path": str(path), "missing": missing},
        )


class ManifestRepository:
    """Batch recording manifest, per-file SNR results and the per-scheme SNR fits."""

    @staticmethod
    def load(path: Path) -> list[BatchItem]:
        frame = pd.read_csv(path, skipinitialspace=True)
        _require_columns(frame, MANIFEST_COLUMNS, path)
        items: list[BatchItem] = []
        for row, record in enumerate(frame[MANIFEST_COLUMNS].to_dict(orient="records"), start=2):
            try:
                items.append(BatchItem.model_validate(record))
            except ValidationError as exc:
                raise ConfigError(
                    f"{path} line {row}: {exc.errors()[0]['msg']}",
                    details={"path": str(path), "line": row},
                ) from exc
        return items

    @staticmethod
    def save(path: Path, items: list[BatchItem]) -> Path:
        frame = pd.DataFrame([i.model_dump(mode="json") for i in items], columns=MANIFEST_COLUMNS)
        return write_csv(frame, path)

    @staticmethod
    def save_results(path: Path, results: list[BatchResult]) -> Path:
        frame = pd.DataFrame([r.model_dump(mode="json") for r in results], columns=RESULT_COLUMNS)
        return write_csv(frame, path)

    @staticmethod
    def save_fits(path: Path, fits: dict[Scheme, SnrFit]) -> Path:
        frame = pd.DataFrame(
            [{"scheme": scheme.value, **fit.model_dump()} for scheme, fit in fits.items()],
            columns=FIT_COLUMNS,
        )
        return write_csv(frame, path)

    @staticmethod
    def load_fits(path: Path) -> dict[Scheme, SnrFit]:
        frame = pd.read_csv(path)
        _require_columns(frame, FIT_COLUMNS, path)
        fits: dict[Scheme, SnrFit] = {}
        for record in frame.to_dict(orient="records"):
            scheme = Scheme(str(record.pop("scheme")))
            fits[scheme] = SnrFit.model_validate(record)
        missing = {Scheme.CLASSICAL, Scheme.QUANTUM} - fits.keys()
        if missing:
            raise ConfigError(
                f"{path} lacks SNR fits for: {', '.join(sorted(s.value for s in missing))}",
                details={"path": str(path)},
            )
        return fits
