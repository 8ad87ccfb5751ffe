from .audio_repo import AudioRepository
from .manifest_repo import ManifestRepository
from .record_repo import DetectorRecordRepository
from .results_repo import ResultsRepository
from .srt_repo import SrtRepository

__all__ = [
    "AudioRepository",
    "DetectorRecordRepository",
    "ManifestRepository",
    "ResultsRepository",
    "SrtRepository",
]
