from pathlib import Path
import numpy as np
import pandas as pd
from pydantic import BaseModel, ValidationError

from app.core.errors import ConfigError
from app.schemas.detection import FringeSweep
from app.schemas.spectral import BandRatio, NoiseSpectrum, WindowMeta

# fixed float text so re-runs produce byte-identical files
FLOAT_FORMAT = "%.10g"


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def _read_header(path: Path) -> dict[str, str]:
    meta: dict[str, str] = {}
    with path.open(encoding="utf-8") as handle:
        for line in handle:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition("=")
            meta[key.strip()] = value.strip()
    return meta


class ResultsRepository:
    """Plot-ready outputs of the fringe and noise commands."""

    @staticmethod
    def save_json(path: Path, model: BaseModel) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        _ = path.write_text(model.model_dump_json(indent=2) + "\n", encoding="utf-8")
        return path

    @staticmethod
    # Classical and quantum sweeps share the displacement column
    def save_fringe_sweep(path: Path, classical: FringeSweep, quantum: FringeSweep) -> Path:
        if not np.array_equal(classical.displacement_nm, quantum.displacement_nm):
            raise ValueError("sweeps must share the displacement grid")
        ratio = quantum.fringe_count / classical.fringe_count if classical.fringe_count else float("nan")
        frame = pd.DataFrame(
            {
                "displacement_nm": classical.displacement_nm,
                "phase_classical_rad": classical.phase_rad,
                "difference_classical": classical.difference,
                "phase_quantum_rad": quantum.phase_rad,
                "difference_quantum": quantum.difference,
                "fringe_count_classical": classical.fringe_count,
                "fringe_count_quantum": quantum.fringe_count,
                "fringe_ratio": ratio,
            }
        )
        return write_csv(frame, path)

    @staticmethod
    # Header comment lines carry what a reload needs to rebuild the NoiseSpectrum
    def save_spectrum(path: Path, spectrum: NoiseSpectrum) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        header = (
            f"# sample_rate={spectrum.sample_rate!r}\n"
            f"# segment_length={spectrum.segment_length}\n"
            f"# averages={spectrum.averages}\n"
            f"# window={spectrum.window_meta.model_dump_json()}\n"
        )
        _ = path.write_text(header, encoding="utf-8")
        frame = pd.DataFrame(
            {
                "frequency_hz": spectrum.frequencies,
                "amplitude_rad_per_sqrt_hz": spectrum.amplitude,
            }
        )
        with path.open("a", encoding="utf-8", newline="") as handle:
            frame.to_csv(handle, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        return path

    @staticmethod
    def load_spectrum(path: Path) -> NoiseSpectrum:
        meta = _read_header(path)
        missing = {"sample_rate", "segment_length", "averages", "window"} - meta.keys()
        if missing:
            raise ConfigError(f"spectrum file {path} lacks header keys: {sorted(missing)}", details={"path": str(path)})
        frame = pd.read_csv(path, comment="#")
        missing = {"frequency_hz", "amplitude_rad_per_sqrt_hz"} - set(frame.columns)
        if missing:
            raise ConfigError(
                f"spectrum file {path} lacks columns: {sorted(missing)}",
                details={"columns": list(frame.columns)},
            )
        try:
            return NoiseSpectrum(
                frequencies=frame["frequency_hz"].to_numpy(),
                amplitude=frame["amplitude_rad_per_sqrt_hz"].to_numpy(),
                window_meta=WindowMeta.model_validate_json(meta["window"]),
                sample_rate=float(meta["sample_rate"]),
                segment_length=int(meta["segment_length"]),
                averages=int(meta["averages"]),
            )
        except (ValidationError, ValueError) as exc:
            raise ConfigError(f"spectrum file {path} is malformed: {exc}", details={"path": str(path)}) from exc

    @staticmethod
    # Both sensors plus the analytic limit lines, one row per frequency
    def save_noise_spectra(
        path: Path,
        classical: NoiseSpectrum,
        quantum: NoiseSpectrum,
        limits: dict[str, float],
    ) -> Path:
        if not np.array_equal(classical.frequencies, quantum.frequencies):
            raise ValueError("spectra must share the frequency grid")
        columns: dict[str, object] = {
            "frequency_hz": classical.frequencies,
            "classical_rad_per_sqrt_hz": classical.amplitude,
            "quantum_rad_per_sqrt_hz": quantum.amplitude,
        }
        for name, value in limits.items():
            columns[name] = np.full(classical.frequencies.shape, value)
        return write_csv(pd.DataFrame(columns), path)

    @staticmethod
    def save_band_ratios(path: Path, ratios: list[BandRatio]) -> Path:
        frame = pd.DataFrame(
            [
                {
                    "band_low_hz": r.band.low,
                    "band_high_hz": r.band.high,
                    "classical_floor": r.classical_floor,
                    "quantum_floor": r.quantum_floor,
                    "ratio": r.ratio,
                }
                for r in ratios
            ],
            columns=["band_low_hz", "band_high_hz", "classical_floor", "quantum_floor", "ratio"],
        )
        return write_csv(frame, path)
