from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
import numpy as np
from scipy.ndimage import uniform_filter1d

from app.core.config import settings
from app.core.errors import DomainError
from app.core.logging import get_logger
from app.schemas.detection import (
    CommonModeNoise,
    DetectorRecord,
    FloatArray,
    FringeSweep,
    NoiseSpectrumKind,
    PhaseTrace,
)
from app.schemas.sensor import Scheme, SensorConfig
from app.services.photonics_service import PhotonicsService
from app.utils.chunking import chunk_ranges
from app.utils.rng import substream

logger = get_logger(__name__)

DEFAULT_CHUNK_SIZE = 1 << 16
_MIN_SLOPE = 1e-6
# substream key of the pump noise; Poisson chunks use keys 0, 1, 2, ...
_PUMP_STREAM = (1 << 32) - 1


def _moving_average(x: FloatArray, window: int) -> FloatArray:
    if window <= 1:
        return x
    return uniform_filter1d(x, size=window, mode="nearest")


class DetectionService:
    """Differential intensity detection: D+ / D- counts and phase estimation."""

    @staticmethod
    def detection_yield(config: SensorConfig) -> float:
        """Detected photons per photon entering the interferometer, before the fringe factor."""
        if config.scheme == Scheme.CLASSICAL:
            return config.eta_ext * config.eta_int
        # R/2 pairs per R photons, signal survives with eta_ext * (eta_int + 1) / 2
        return config.eta_ext * (config.eta_int + 1) / 4

    @staticmethod
    def common_mode_factors(noise: CommonModeNoise | None, n: int) -> FloatArray:
        """Multiplicative pump-power series m_k = 1 + a * x_k (x unit variance), clipped at 0."""
        if noise is None or noise.relative_amplitude == 0 or n == 0:
            return np.ones(n, dtype=np.float64)

        rng = substream(noise.seed, _PUMP_STREAM)
        white = rng.standard_normal(n)
        if noise.spectrum == NoiseSpectrumKind.WHITE or n < 4:
            shaped = white
        else:
            spectrum = np.fft.rfft(white)
            freqs = np.fft.rfftfreq(n)
            scale = np.zeros_like(freqs)
            scale[1:] = 1 / np.sqrt(freqs[1:])
            shaped = np.fft.irfft(spectrum * scale, n=n)

        std = float(np.std(shaped))
        if std == 0:
            return np.ones(n, dtype=np.float64)
        shaped = (shaped - np.mean(shaped)) / std
        return np.clip(1 + noise.relative_amplitude * shaped, 0, None)

    @staticmethod
    def _expected_counts(
        phase: FloatArray,
        config: SensorConfig,
        sample_rate: float,
        factors: FloatArray,
    ) -> tuple[FloatArray, FloatArray]:
        per_bin = config.photon_rate_R / sample_rate * DetectionService.detection_yield(config)
        fringe = config.visibility * np.cos(phase)
        dark = config.dark_count_rate / sample_rate
        lam_plus = factors * per_bin * (1 + fringe) / 2 + dark
        lam_minus = factors * per_bin * (1 - fringe) / 2 + dark
        # |fringe| <= 1 keeps both channels non-negative; clip float round-off
        return np.clip(lam_plus, 0, None), np.clip(lam_minus, 0, None)

    @staticmethod
    def _check_trace(phase: PhaseTrace) -> None:
        if len(phase) == 0:
            raise DomainError("phase trace must be non-empty")
        if phase.invalid_count or not np.all(np.isfinite(phase.samples)):
            raise DomainError("phase trace must be finite in every bin")

    @staticmethod
    def expected_record(
        phase: PhaseTrace, config: SensorConfig, noise: CommonModeNoise | None = None
    ) -> DetectorRecord:
        """Noiseless record: float expected counts per bin."""
        DetectionService._check_trace(phase)
        factors = DetectionService.common_mode_factors(noise, len(phase))
        lam_plus, lam_minus = DetectionService._expected_counts(
            phase.samples, config, phase.sample_rate, factors
        )
        return DetectorRecord(
            i_plus=lam_plus,
            i_minus=lam_minus,
            sample_rate=phase.sample_rate,
            config_snapshot=config,
            seed=0,
        )

    @staticmethod
    # Poisson counts, per-chunk substreams (seed, chunk) -> serial == parallel
    def simulate_record(
        phase: PhaseTrace,
        config: SensorConfig,
        noise: CommonModeNoise | None,
        seed: int,
        chunk_size: int = DEFAULT_CHUNK_SIZE,
        max_workers: int | None = None,
    ) -> DetectorRecord:
        DetectionService._check_trace(phase)
        n = len(phase)
        factors = DetectionService.common_mode_factors(noise, n)
        lam_plus, lam_minus = DetectionService._expected_counts(
            phase.samples, config, phase.sample_rate, factors
        )

        i_plus = np.empty(n, dtype=np.int64)
        i_minus = np.empty(n, dtype=np.int64)
        ranges = chunk_ranges(n, chunk_size)

        def draw(index: int) -> None:
            start, stop = ranges[index]
            rng = substream(seed, index)
            i_plus[start:stop] = rng.poisson(lam_plus[start:stop])
            i_minus[start:stop] = rng.poisson(lam_minus[start:stop])

        workers = max_workers if max_workers is not None else settings.MAX_WORKERS
        if workers > 1 and len(ranges) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(draw, range(len(ranges))))
        else:
            for index in range(len(ranges)):
                draw(index)

        logger.debug(
            "Simulated %d bins (%s) in %d chunks, mean counts/bin %.3f",
            n,
            config.scheme.value,
            len(ranges),
            float(np.mean(lam_plus + lam_minus)),
        )
        return DetectorRecord(
            i_plus=i_plus,
            i_minus=i_minus,
            sample_rate=phase.sample_rate,
            config_snapshot=config,
            seed=seed,
        )

    @staticmethod
    def _operating_slope(record: DetectorRecord, operating_point: float) -> tuple[float, float]:
        if not math.isfinite(operating_point):
            raise DomainError("operating point must be finite")
        nu = record.config_snapshot.visibility
        slope = nu * math.sin(operating_point)
        if abs(slope) < _MIN_SLOPE:
            raise DomainError(
                "operating point has no fringe slope (visibility * sin(phi0) ~ 0)",
                details={"operating_point": operating_point, "visibility": nu},
            )
        return nu * math.cos(operating_point), slope

    @staticmethod
    def _finish(
        delta: FloatArray, valid: np.ndarray, record: DetectorRecord
    ) -> PhaseTrace:
        if record.config_snapshot.scheme == Scheme.QUANTUM:
            # optical phase of the pair is twice the single-pass mechanical phase
            delta = delta / 2
        invalid = int(np.count_nonzero(~valid))
        if invalid:
            logger.warning("%d of %d bins had no reference counts and were flagged invalid", invalid, valid.size)
            return PhaseTrace(samples=delta, sample_rate=record.sample_rate, valid=valid)
        return PhaseTrace(samples=delta, sample_rate=record.sample_rate)

    @staticmethod
    def estimate_phase(
        record: DetectorRecord, operating_point: float = math.pi / 2, reference_window: int = 1
    ) -> PhaseTrace:
        """
        Small-signal phase about the operating point from the difference channel.
        The difference of each bin is normalised by the sum of the same bin, so pump
        power fluctuations drop out of the ratio.
        reference_window > 1 normalises by the sum averaged over that many bins instead.
        That removes the E[1/S] variance excess of low-count bins but gives up common-mode
        rejection above f / window once the phase moves off the operating point.
        Quantum records report the single-pass mechanical phase (half the optical one).
        """
        if reference_window < 1:
            raise DomainError("reference_window must be >= 1", details={"reference_window": reference_window})
        offset, slope = DetectionService._operating_slope(record, operating_point)

        plus = record.i_plus.astype(np.float64)
        minus = record.i_minus.astype(np.float64)
        reference = _moving_average(plus + minus, reference_window)
        valid = reference > 0

        delta = np.full(plus.shape, np.nan)
        ratio = (plus[valid] - minus[valid]) / reference[valid]
        delta[valid] = (offset - ratio) / slope
        return DetectionService._finish(delta, valid, record)

    @staticmethod
    def naive_single_channel_estimate(
        record: DetectorRecord, operating_point: float = math.pi / 2
    ) -> PhaseTrace:
        """D+ only, normalised by its own long-run mean; no common-mode rejection."""
        offset, slope = DetectionService._operating_slope(record, operating_point)
        plus = record.i_plus.astype(np.float64)
        mean_plus = float(np.mean(plus))
        if mean_plus <= 0 or 1 + offset <= 0:
            raise DomainError("D+ channel has no counts")
        ratio = (1 + offset) * plus / mean_plus - 1
        delta = (offset - ratio) / slope
        return DetectionService._finish(delta, np.ones(plus.shape, dtype=np.bool_), record)

    @staticmethod
    # Noiseless D+ - D- (counts/s) against mirror displacement
    def fringe_sweep(d_min: float, d_max: float, steps: int, config: SensorConfig) -> FringeSweep:
        if steps < 2:
            raise DomainError("steps must be >= 2", details={"steps": steps})
        if not d_max > d_min:
            raise DomainError("displacement range must be increasing", details={"d_min": d_min, "d_max": d_max})

        displacement = np.linspace(d_min, d_max, steps)
        phase = PhotonicsService.displacement_to_phase(displacement, config)
        total_rate = config.photon_rate_R * DetectionService.detection_yield(config)
        difference = total_rate * config.visibility * np.cos(phase)
        return FringeSweep(
            displacement_nm=displacement,
            phase_rad=phase,
            difference=difference,
            total_rate=total_rate,
            fringe_count=PhotonicsService.fringe_count(float(phase[0]), float(phase[-1])),
        )
