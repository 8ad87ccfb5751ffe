from pathlib import Path
import numpy as np
from scipy.io import wavfile

from app.core.errors import DomainError
from app.core.logging import get_logger
from app.schemas.audio import AudioSignal

logger = get_logger(__name__)

_INT16_FULL_SCALE = 32767


class AudioRepository:
    """16-bit mono WAV in, 16-bit mono WAV out; float64 in between."""

    @staticmethod
    def read(path: Path, spl_reference: float = 0.0) -> AudioSignal:
        rate, data = wavfile.read(path)
        samples = np.asarray(data)

        if samples.ndim == 2:
            logger.warning("%s has %d channels; mixing down to mono", path, samples.shape[1])
            samples = samples.mean(axis=1)

        if np.issubdtype(data.dtype, np.integer):
            info = np.iinfo(data.dtype)
            if info.min == 0:
                # 8-bit WAV is unsigned
                middle = (info.max + 1) / 2
                samples = (samples.astype(np.float64) - middle) / middle
            else:
                samples = samples.astype(np.float64) / -info.min
        else:
            samples = samples.astype(np.float64)

        if samples.size == 0:
            raise DomainError(f"{path} contains no samples", details={"path": str(path)})
        return AudioSignal(samples=np.clip(samples, -1.0, 1.0), sample_rate=float(rate), spl_reference=spl_reference)

    @staticmethod
    def write(path: Path, audio: AudioSignal) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        rate = int(round(audio.sample_rate))
        pcm = np.round(np.clip(audio.samples, -1.0, 1.0) * _INT16_FULL_SCALE).astype(np.int16)
        wavfile.write(path, rate, pcm)
        return path
