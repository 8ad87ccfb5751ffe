from __future__ import annotations

import math
import numpy as np
from scipy import signal

from app.core.errors import DomainError
from app.core.logging import get_logger
from app.schemas.detection import FloatArray, PhaseTrace
from app.schemas.spectral import (
    Band,
    BandRatio,
    EnhancementReport,
    FloorFit,
    NoiseSpectrum,
    WindowMeta,
)

logger = get_logger(__name__)

MIN_SEGMENT_LENGTH = 16
MAD_SCALE = 1.4826
OUTLIER_THRESHOLD = 5.0
DEFAULT_PHOTON_RATE = 2.14e6


def _segments(n: int, segment_length: int, overlap: float) -> int:
    step = segment_length - int(segment_length * overlap)
    if n < segment_length:
        return 0
    return (n - segment_length) // step + 1


def _fill_invalid(trace: PhaseTrace) -> FloatArray:
    mask = trace.mask()
    if mask.all():
        return trace.samples
    if not mask.any():
        raise DomainError("phase trace has no valid samples")
    index = np.arange(trace.samples.size)
    logger.warning("Interpolating %d invalid bins before the spectral estimate", trace.invalid_count)
    return np.interp(index, index[mask], trace.samples[mask])


class SpectralService:
    @staticmethod
    def minimum_length(window_meta: WindowMeta) -> int:
        """Shortest trace that still gives two overlapping segments."""
        segment = window_meta.segment_length or MIN_SEGMENT_LENGTH
        step = segment - int(segment * window_meta.overlap)
        return segment + step

    @staticmethod
    # Largest power of two that still gives min_averages overlapping segments
    def choose_segment_length(n: int, window_meta: WindowMeta) -> int:
        minimum = SpectralService.minimum_length(window_meta)
        if n < minimum:
            raise DomainError(
                f"trace too short for the spectral estimate: need at least {minimum} samples, got {n}",
                details={"minimum_length": minimum, "length": n},
            )
        if window_meta.segment_length is not None:
            return window_meta.segment_length

        available = _segments(n, MIN_SEGMENT_LENGTH, window_meta.overlap)
        if available < window_meta.min_averages:
            logger.warning(
                "Trace of %d samples gives only %d averages (wanted %d); spectrum will be noisy",
                n,
                available,
                window_meta.min_averages,
            )
            return MIN_SEGMENT_LENGTH

        length = MIN_SEGMENT_LENGTH
        while _segments(n, 2 * length, window_meta.overlap) >= window_meta.min_averages:
            length *= 2
        return length

    @staticmethod
    def phase_noise_spectrum(trace: PhaseTrace, window_meta: WindowMeta | None = None) -> NoiseSpectrum:
        """
        One-sided amplitude spectral density (rad/sqrt(Hz)) by Welch averaging.
        The DC bin is dropped.
        """
        meta = window_meta or WindowMeta()
        samples = _fill_invalid(trace)
        segment_length = SpectralService.choose_segment_length(samples.size, meta)
        noverlap = int(segment_length * meta.overlap)

        freqs, psd = signal.welch(
            samples,
            fs=trace.sample_rate,
            window=meta.window,
            nperseg=segment_length,
            noverlap=noverlap,
            detrend="constant",
            return_onesided=True,
            scaling="density",
        )
        return NoiseSpectrum(
            frequencies=freqs[1:],
            amplitude=np.sqrt(psd[1:]),
            window_meta=meta,
            sample_rate=trace.sample_rate,
            segment_length=segment_length,
            averages=_segments(samples.size, segment_length, meta.overlap),
        )

    @staticmethod
    def integrated_variance(spectrum: NoiseSpectrum) -> float:
        """Integral of the PSD over all positive frequencies (Parseval check against the trace variance)."""
        return float(np.sum(spectrum.amplitude ** 2) * spectrum.resolution)

    @staticmethod
    def analytic_floor(sensitivity: float, photon_rate: float, one_sided: bool = True) -> float:
        """White phase-noise floor S * sqrt(2/R) (one-sided) or S / sqrt(R)."""
        if not photon_rate > 0:
            raise DomainError("photon rate must be > 0", details={"photon_rate": photon_rate})
        if not sensitivity > 0:
            raise DomainError("sensitivity must be > 0", details={"sensitivity": sensitivity})
        factor = 2.0 if one_sided else 1.0
        return sensitivity * math.sqrt(factor / photon_rate)

    @staticmethod
    def _band_psd(spectrum: NoiseSpectrum, band: Band) -> FloatArray:
        freqs = spectrum.frequencies
        if freqs.size == 0 or band.low > freqs[-1] or band.high < freqs[0]:
            raise DomainError(
                f"band {band} outside the spectrum support",
                details={"low": band.low, "high": band.high},
            )
        nyquist = spectrum.sample_rate / 2
        selected = (freqs >= band.low) & (freqs <= band.high) & (freqs < nyquist)
        if not selected.any():
            raise DomainError(f"band {band} contains no frequency bins", details={"low": band.low, "high": band.high})
        return spectrum.amplitude[selected] ** 2

    @staticmethod
    def fit_noise_floor(
        spectrum: NoiseSpectrum,
        band: Band,
        bootstrap_samples: int = 200,
        seed: int = 0,
    ) -> FloorFit:
        """
        Flat floor in the band: PSD bins further than 5 scaled MADs from the
        median are rejected (tones, spurs), the floor is sqrt(mean of the rest).
        Uncertainty: bootstrap std of the same statistic.
        """
        psd = SpectralService._band_psd(spectrum, band)
        median = float(np.median(psd))
        mad = float(np.median(np.abs(psd - median)))
        threshold = max(OUTLIER_THRESHOLD * MAD_SCALE * mad, 1e-12 * abs(median))
        inliers = psd[np.abs(psd - median) <= threshold]

        amplitude = math.sqrt(float(np.mean(inliers)))
        rng = np.random.default_rng(seed)
        picks = rng.integers(0, inliers.size, size=(bootstrap_samples, inliers.size))
        resampled = np.sqrt(inliers[picks].mean(axis=1))
        uncertainty = float(np.std(resampled, ddof=1)) if bootstrap_samples > 1 else 0.0

        return FloorFit(
            amplitude=amplitude,
            uncertainty=uncertainty,
            band=band,
            bins_used=int(inliers.size),
            bins_rejected=int(psd.size - inliers.size),
        )

    @staticmethod
    def enhancement(
        classical: NoiseSpectrum,
        quantum: NoiseSpectrum,
        band: Band,
        photon_rate: float = DEFAULT_PHOTON_RATE,
        bootstrap_samples: int = 200,
        seed: int = 0,
    ) -> EnhancementReport:
        classical_fit = SpectralService.fit_noise_floor(classical, band, bootstrap_samples, seed)
        quantum_fit = SpectralService.fit_noise_floor(quantum, band, bootstrap_samples, seed)
        if quantum_fit.amplitude <= 0:
            raise DomainError("quantum floor is zero in the band", details={"band": str(band)})

        snl = SpectralService.analytic_floor(1.0, photon_rate)
        ratio = classical_fit.amplitude / quantum_fit.amplitude
        return EnhancementReport(
            amplitude_ratio=ratio,
            variance_ratio=ratio ** 2,
            band=band,
            classical_excess_over_snl=classical_fit.amplitude / snl,
            classical_floor=classical_fit,
            quantum_floor=quantum_fit,
            snl_floor=snl,
        )

    @staticmethod
    # Sub-shot-noise persistence: one floor ratio per band
    def band_ratios(
        classical: NoiseSpectrum,
        quantum: NoiseSpectrum,
        bands: list[Band],
        bootstrap_samples: int = 200,
        seed: int = 0,
    ) -> list[BandRatio]:
        ratios: list[BandRatio] = []
        for band in bands:
            c = SpectralService.fit_noise_floor(classical, band, bootstrap_samples, seed)
            q = SpectralService.fit_noise_floor(quantum, band, bootstrap_samples, seed)
            ratios.append(
                BandRatio(
                    band=band,
                    classical_floor=c.amplitude,
                    quantum_floor=q.amplitude,
                    ratio=c.amplitude / q.amplitude,
                )
            )
        return ratios
