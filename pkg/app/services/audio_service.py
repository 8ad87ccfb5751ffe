from __future__ import annotations

import math
from collections.abc import Sequence
import numpy as np
from scipy import signal, stats

from app.core.errors import DomainError
from app.core.logging import get_logger
from app.schemas.audio import (
    P_REF_PA,
    AudioSignal,
    LinearityReport,
    MembraneModel,
    MembraneResponse,
    SnrFit,
)
from app.schemas.detection import CommonModeNoise, DetectorRecord, FloatArray, PhaseTrace
from app.schemas.experiment import ExperimentConfig
from app.schemas.sensor import Scheme, SensorConfig
from app.services.detection_service import DetectionService
from app.services.photonics_service import PhotonicsService
from app.utils.rng import derive_seed, substream

logger = get_logger(__name__)

SNR_CAP_DB = 150.0
BUTTER_ORDER = 8
# total drop at the flat-band edge after the forward-backward pass
EDGE_DROP_DB = 0.5


def _pressure_scale(volume_db_spl: float, spl_reference: float) -> float:
    """Pa per unit PCM at the given playback volume."""
    return P_REF_PA * 10 ** ((volume_db_spl - spl_reference) / 20)


def _flat_band_sos(response: MembraneResponse, sample_rate: float) -> np.ndarray | None:
    # one pass loses EDGE_DROP_DB / 2 at the edge: (edge/fc)^(2n) = 10^(drop/20) - 1
    ratio = (10 ** (EDGE_DROP_DB / 20) - 1) ** (1 / (2 * BUTTER_ORDER))
    cutoff = response.flat_band_edge_hz / ratio
    if cutoff >= sample_rate / 2:
        return None
    return signal.butter(BUTTER_ORDER, cutoff, btype="lowpass", fs=sample_rate, output="sos")


def _resonance_ba(response: MembraneResponse, sample_rate: float) -> tuple[np.ndarray, np.ndarray] | None:
    if response.resonance is None:
        return None
    w0 = 2 * math.pi * response.resonance.frequency_hz
    q = response.resonance.q
    # unit-DC-gain damped oscillator
    return signal.bilinear([w0 ** 2], [1.0, w0 / q, w0 ** 2], fs=sample_rate)


def _linearity(phase_deviation: FloatArray, limit: float) -> LinearityReport:
    magnitude = np.abs(phase_deviation)
    peak = float(np.max(magnitude)) if magnitude.size else 0.0
    clipped = float(np.mean(magnitude >= limit)) if magnitude.size else 0.0
    return LinearityReport(peak_phase_rad=peak, limit_rad=limit, clipped_fraction=clipped)


class AudioService:
    """Membrane transducer, microphone pipeline and SNR analysis."""

    # ---- Stimuli ----
    @staticmethod
    def synthesize_tone(
        frequency: float, duration: float, sample_rate: float, amplitude: float = 0.5
    ) -> AudioSignal:
        if not 0 < frequency < sample_rate / 2:
            raise DomainError("tone frequency must be in (0, Nyquist)", details={"frequency": frequency})
        if not 0 <= amplitude <= 1:
            raise DomainError("amplitude must be in [0, 1]", details={"amplitude": amplitude})
        t = np.arange(int(round(duration * sample_rate))) / sample_rate
        return AudioSignal(samples=amplitude * np.sin(2 * math.pi * frequency * t), sample_rate=sample_rate)

    @staticmethod
    # Voiced harmonic source, syllable-rate envelope
    def synthesize_speech_like(
        duration: float, sample_rate: float, seed: int, peak: float = 0.5
    ) -> AudioSignal:
        if not 0 < peak <= 1:
            raise DomainError("peak must be in (0, 1]", details={"peak": peak})
        n = int(round(duration * sample_rate))
        if n < 2:
            raise DomainError("stimulus must contain at least two samples", details={"duration": duration})

        rng = substream(seed, 0)
        t = np.arange(n) / sample_rate
        f0 = 120.0 * (1 + 0.08 * np.sin(2 * math.pi * 0.7 * t + rng.uniform(0, 2 * math.pi)))
        phase = 2 * math.pi * np.cumsum(f0) / sample_rate

        voiced = np.zeros(n)
        top = min(4000.0, sample_rate / 2 * 0.9)
        for k in range(1, int(top // 120.0) + 1):
            # crude formant tilt
            weight = 1 / k * (1 + 2 * math.exp(-(((k * 120.0) - 700.0) / 300.0) ** 2))
            voiced += weight * np.sin(k * phase + rng.uniform(0, 2 * math.pi))

        syllables = 0.55 + 0.45 * np.sin(2 * math.pi * 4.0 * t + rng.uniform(0, 2 * math.pi))
        words = 0.6 + 0.4 * np.sin(2 * math.pi * 0.9 * t + rng.uniform(0, 2 * math.pi))
        waveform = voiced * syllables * words

        scale = float(np.max(np.abs(waveform)))
        return AudioSignal(samples=peak * waveform / scale, sample_rate=sample_rate)

    @staticmethod
    def volume_grid(start: float, step: float, steps: int) -> FloatArray:
        if steps < 1 or not step > 0:
            raise DomainError("volume grid needs steps >= 1 and step > 0", details={"steps": steps, "step": step})
        return start + step * np.arange(steps, dtype=np.float64)

    # ---- Transducer ----
    @staticmethod
    def membrane_response(frequencies: FloatArray, membrane: MembraneModel, sample_rate: float) -> FloatArray:
        """Relative pressure-to-displacement gain in dB at the given frequencies."""
        freqs = np.asarray(frequencies, dtype=np.float64)
        magnitude = np.ones(freqs.shape)
        sos = _flat_band_sos(membrane.response, sample_rate)
        if sos is not None:
            _, h = signal.sosfreqz(sos, worN=freqs, fs=sample_rate)
            magnitude *= np.abs(h) ** 2
        ba = _resonance_ba(membrane.response, sample_rate)
        if ba is not None:
            _, h = signal.freqz(ba[0], ba[1], worN=freqs, fs=sample_rate)
            magnitude *= np.abs(h)
        return 20 * np.log10(np.maximum(magnitude, 1e-300))

    @staticmethod
    def audio_to_displacement(audio: AudioSignal, volume_va: float, membrane: MembraneModel) -> FloatArray:
        """Membrane displacement (nm) for audio played at volume_va dB_SPL."""
        pressure = audio.samples * _pressure_scale(volume_va, audio.spl_reference)

        sos = _flat_band_sos(membrane.response, audio.sample_rate)
        if sos is not None and pressure.size > 3 * (2 * sos.shape[0] + 1):
            pressure = signal.sosfiltfilt(sos, pressure)
        ba = _resonance_ba(membrane.response, audio.sample_rate)
        if ba is not None:
            pressure = signal.lfilter(ba[0], ba[1], pressure)
        return membrane.gain_nm_per_pa * pressure

    @staticmethod
    def phase_to_displacement(phase: FloatArray, config: SensorConfig) -> FloatArray:
        """Inverse of the estimator scaling: reported phase (rad) -> displacement (nm)."""
        per_nm = PhotonicsService.phase_per_nm(config)
        if config.scheme == Scheme.QUANTUM:
            # estimator already halved the optical phase
            per_nm = per_nm / 2
        return phase / per_nm

    @staticmethod
    def record_through_microphone(
        audio: AudioSignal,
        volume_va: float,
        scheme: Scheme,
        config: ExperimentConfig,
        seed: int,
    ) -> AudioSignal:
        recorded, _ = AudioService.record_with_counts(audio, volume_va, scheme, config, seed)
        return recorded

    @staticmethod
    def record_with_counts(
        audio: AudioSignal,
        volume_va: float,
        scheme: Scheme,
        config: ExperimentConfig,
        seed: int,
    ) -> tuple[AudioSignal, DetectorRecord]:
        """
        audio -> membrane displacement -> optical phase -> D+/D- counts
        -> phase estimate -> displacement -> PCM at the recording reference volume.
        Also returns the raw detector counts behind the recording.
        """
        sensor = config.sensors.for_scheme(scheme).model_copy(
            update={"photon_rate_R": config.audio.photon_rate_R}
        )
        operating_point = config.detection.operating_point_rad

        displacement = AudioService.audio_to_displacement(audio, volume_va, config.membrane)
        deviation = PhotonicsService.displacement_to_phase(displacement, sensor)
        report = _linearity(deviation, config.audio.linear_limit_rad)
        if report.violated:
            logger.warning(
                "Linear regime exceeded at %.1f dB_SPL (%s): peak %.3f rad >= %.3f rad, %.2f%% of samples clipped",
                volume_va,
                scheme.value,
                report.peak_phase_rad,
                report.limit_rad,
                100 * report.clipped_fraction,
            )

        phase = PhaseTrace(samples=operating_point + deviation, sample_rate=audio.sample_rate)
        noise = CommonModeNoise(
            relative_amplitude=config.noise.relative_amplitude,
            spectrum=config.noise.spectrum,
            seed=derive_seed(seed, 1),
        )
        record = DetectionService.simulate_record(
            phase, sensor, noise, seed, chunk_size=config.detection.chunk_size
        )
        estimate = DetectionService.estimate_phase(
            record, operating_point, config.detection.reference_window
        )
        samples = np.nan_to_num(estimate.samples, nan=0.0)
        recovered = AudioService.phase_to_displacement(samples, sensor)

        scale = config.membrane.gain_nm_per_pa * _pressure_scale(
            config.audio.record_volume_db_spl, audio.spl_reference
        )
        pcm = recovered / scale
        overflow = float(np.mean(np.abs(pcm) > 1.0))
        if overflow:
            logger.warning("Recorded PCM clipped to full scale in %.2f%% of samples", 100 * overflow)
        recorded = AudioSignal(
            samples=np.clip(pcm, -1.0, 1.0),
            sample_rate=audio.sample_rate,
            spl_reference=audio.spl_reference,
        )
        return recorded, record

    # ---- SNR ----
    @staticmethod
    def snr_measure(clean: AudioSignal, recorded: AudioSignal) -> float:
        """
        10 log10(|g c|^2 / |r - g c|^2), g the least-squares gain of r onto c.
        Rates are matched by polyphase resampling; lengths truncated to the shorter.
        """
        rec = recorded.samples
        if recorded.sample_rate != clean.sample_rate:
            up, down = (
                int(round(clean.sample_rate)),
                int(round(recorded.sample_rate)),
            )
            divisor = math.gcd(up, down)
            rec = signal.resample_poly(rec, up // divisor, down // divisor)

        n = min(rec.size, clean.samples.size)
        if n == 0:
            raise DomainError("cannot measure SNR of an empty signal")
        c = clean.samples[:n]
        r = rec[:n]

        energy = float(np.dot(c, c))
        if energy == 0:
            raise DomainError("clean reference is silent")
        gain = float(np.dot(r, c)) / energy
        fitted = gain * c
        signal_power = float(np.dot(fitted, fitted))
        residual = r - fitted
        noise_power = float(np.dot(residual, residual))

        if signal_power == 0:
            return -SNR_CAP_DB
        if noise_power <= signal_power * 10 ** (-SNR_CAP_DB / 10):
            return SNR_CAP_DB
        return 10 * math.log10(signal_power / noise_power)

    @staticmethod
    def fit_snr_vs_volume(points: Sequence[tuple[float, float]]) -> SnrFit:
        if len(points) < 3:
            raise DomainError("SNR fit requires >= 3 volume points", details={"points": len(points)})
        volumes = np.array([p[0] for p in points], dtype=np.float64)
        snrs = np.array([p[1] for p in points], dtype=np.float64)
        if np.unique(volumes).size < 2:
            raise DomainError("SNR fit requires at least two distinct volumes")

        fit = stats.linregress(volumes, snrs)
        residuals = snrs - (fit.slope * volumes + fit.intercept)
        return SnrFit(
            alpha=float(fit.slope),
            beta=float(fit.intercept),
            residual=float(np.sqrt(np.mean(residuals ** 2))),
            alpha_stderr=float(fit.stderr),
            beta_stderr=float(fit.intercept_stderr),
            points=len(points),
        )
