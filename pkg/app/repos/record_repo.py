from pathlib import Path
import pandas as pd

from app.core.errors import ConfigError
from app.schemas.detection import DetectorRecord
from app.schemas.sensor import SensorConfig

_COLUMNS = ["bin_index", "i_plus", "i_minus"]


class DetectorRecordRepository:
    """
    CSV `bin_index, i_plus, i_minus`.
    Header comment lines carry sample_rate, seed and the sensor config (JSON).
    """

    @staticmethod
    def save(path: Path, record: DetectorRecord) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        header = (
            f"# sample_rate={record.sample_rate!r}\n"
            f"# seed={record.seed}\n"
            f"# config={record.config_snapshot.model_dump_json()}\n"
        )
        _ = path.write_text(header, encoding="utf-8")
        frame = pd.DataFrame(
            {
                "bin_index": range(len(record)),
                "i_plus": record.i_plus,
                "i_minus": record.i_minus,
            }
        )
        with path.open("a", encoding="utf-8", newline="") as handle:
            frame.to_csv(handle, index=False, lineterminator="\n")
        return path

    @staticmethod
    def load(path: Path) -> DetectorRecord:
        meta: dict[str, str] = {}
        with path.open(encoding="utf-8") as handle:
            for line in handle:
                if not line.startswith("#"):
                    break
                key, _, value = line[1:].strip().partition("=")
                meta[key.strip()] = value.strip()

        missing = {"sample_rate", "seed", "config"} - meta.keys()
        if missing:
            raise ConfigError(
                f"detector record {path} lacks header keys: {sorted(missing)}",
                details={"path": str(path)},
            )
        frame = pd.read_csv(path, comment="#")
        if list(frame.columns) != _COLUMNS:
            raise ConfigError(
                f"detector record {path} must have columns {_COLUMNS}",
                details={"columns": list(frame.columns)},
            )
        return DetectorRecord(
            i_plus=frame["i_plus"].to_numpy(),
            i_minus=frame["i_minus"].to_numpy(),
            sample_rate=float(meta["sample_rate"]),
            config_snapshot=SensorConfig.model_validate_json(meta["config"]),
            seed=int(meta["seed"]),
        )

