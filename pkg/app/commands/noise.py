import argparse
from pathlib import Path
import numpy as np

from app.commands.common import add_common_arguments, output_dir, resolve_config
from app.core.context import RunContext
from app.core.errors import ConfigError
from app.core.logging import get_logger
from app.repos.record_repo import DetectorRecordRepository
from app.repos.results_repo import ResultsRepository
from app.schemas.detection import CommonModeNoise, DetectorRecord, PhaseTrace
from app.schemas.sensor import Scheme, SensorConfig
from app.schemas.experiment import ExperimentConfig
from app.schemas.spectral import NoiseSpectrum
from app.services.detection_service import DetectionService
from app.services.photonics_service import PhotonicsService
from app.services.spectral_service import SpectralService
from app.utils.rng import derive_seed

NAME = "noise-benchmark"


def register(subparsers: "argparse._SubParsersAction[argparse.ArgumentParser]") -> None:
    parser = subparsers.add_parser(NAME, help="phase-noise spectra of both sensors at equal photon rate")
    add_common_arguments(parser)
    parser.add_argument(
        "--save-records",
        type=Path,
        default=None,
        help="also write the raw D+/D- counts of both sensors to record_<scheme>.csv in this directory",
    )
    source = parser.add_mutually_exclusive_group()
    source.add_argument(
        "--from-records", type=Path, default=None, help="analyse record_<scheme>.csv files instead of simulating"
    )
    source.add_argument(
        "--from-spectra",
        type=Path,
        default=None,
        help="rebuild the report from spectrum_<scheme>.csv files of an earlier run",
    )
    parser.set_defaults(handler=run)


def record_file(directory: Path, scheme: Scheme) -> Path:
    return directory / f"record_{scheme.value}.csv"


def spectrum_file(directory: Path, scheme: Scheme) -> Path:
    return directory / f"spectrum_{scheme.value}.csv"


def _simulate(config: ExperimentConfig, sensor: SensorConfig, stream: int) -> DetectorRecord:
    detection = config.detection
    phase = PhaseTrace(
        samples=np.full(detection.n_bins, detection.operating_point_rad),
        sample_rate=detection.sample_rate_hz,
    )
    noise = CommonModeNoise(
        relative_amplitude=config.noise.relative_amplitude,
        spectrum=config.noise.spectrum,
        seed=derive_seed(config.seed, stream, 1),
    )
    return DetectionService.simulate_record(
        phase, sensor, noise, derive_seed(config.seed, stream), chunk_size=detection.chunk_size
    )


def _spectrum(config: ExperimentConfig, record: DetectorRecord) -> NoiseSpectrum:
    # unmodulated trace at quadrature, so the smoothed reference keeps common-mode rejection
    detection = config.detection
    trace = DetectionService.estimate_phase(
        record, detection.operating_point_rad, detection.benchmark_reference_window
    )
    return SpectralService.phase_noise_spectrum(trace, config.spectral.window)


def _load_record(path: Path, scheme: Scheme) -> DetectorRecord:
    record = DetectorRecordRepository.load(path)
    if record.config_snapshot.scheme is not scheme:
        raise ConfigError(
            f"{path} holds a {record.config_snapshot.scheme.value} record, expected {scheme.value}",
            details={"path": str(path)},
        )
    return record


def run(args: argparse.Namespace, context: RunContext) -> None:
    logger = get_logger(__name__, context)
    config = resolve_config(args)
    out = output_dir(config)
    classical_sensor = config.sensors.classical
    quantum_sensor = config.sensors.quantum
    sample_rate = config.detection.sample_rate_hz

    if args.from_spectra is not None:
        classical = ResultsRepository.load_spectrum(spectrum_file(args.from_spectra, Scheme.CLASSICAL))
        quantum = ResultsRepository.load_spectrum(spectrum_file(args.from_spectra, Scheme.QUANTUM))
        if classical.sample_rate != quantum.sample_rate:
            raise ConfigError("saved spectra were taken at different sample rates", details={"dir": str(args.from_spectra)})
        sample_rate = classical.sample_rate
        logger.info("Loaded spectra from %s", args.from_spectra)
    else:
        if args.from_records is not None:
            classical_record = _load_record(record_file(args.from_records, Scheme.CLASSICAL), Scheme.CLASSICAL)
            quantum_record = _load_record(record_file(args.from_records, Scheme.QUANTUM), Scheme.QUANTUM)
            classical_sensor = classical_record.config_snapshot
            quantum_sensor = quantum_record.config_snapshot
            sample_rate = classical_record.sample_rate
            logger.info("Loaded %d + %d detector bins from %s", len(classical_record), len(quantum_record), args.from_records)
        else:
            logger.info("Simulating %d bins per sensor at %.0f Hz", config.detection.n_bins, sample_rate)
            classical_record = _simulate(config, classical_sensor, 0)
            quantum_record = _simulate(config, quantum_sensor, 1)
        if args.save_records is not None:
            for scheme, record in ((Scheme.CLASSICAL, classical_record), (Scheme.QUANTUM, quantum_record)):
                DetectorRecordRepository.save(record_file(args.save_records, scheme), record)
            logger.info("Saved detector records to %s", args.save_records)
        classical = _spectrum(config, classical_record)
        quantum = _spectrum(config, quantum_record)
        ResultsRepository.save_spectrum(spectrum_file(out, Scheme.CLASSICAL), classical)
        ResultsRepository.save_spectrum(spectrum_file(out, Scheme.QUANTUM), quantum)

    if classical_sensor.photon_rate_R != quantum_sensor.photon_rate_R:
        logger.warning("Sensors run at different photon rates; the benchmark assumes equal R")

    rate = classical_sensor.photon_rate_R
    band = config.spectral.fit_band(sample_rate)
    report = SpectralService.enhancement(
        classical, quantum, band, rate, config.spectral.bootstrap_samples, config.seed
    )
    bands = [b for b in config.spectral.sub_bands if b.low < sample_rate / 2]
    ratios = SpectralService.band_ratios(classical, quantum, bands, config.spectral.bootstrap_samples, config.seed)

    limits = {
        "snl_rad_per_sqrt_hz": SpectralService.analytic_floor(1.0, rate),
        "classical_limit_rad_per_sqrt_hz": SpectralService.analytic_floor(
            PhotonicsService.classical_sensitivity(classical_sensor), rate
        ),
        "quantum_limit_rad_per_sqrt_hz": SpectralService.analytic_floor(
            PhotonicsService.quantum_sensitivity(quantum_sensor), rate
        ),
    }
    ResultsRepository.save_noise_spectra(out / "noise_spectra.csv", classical, quantum, limits)
    ResultsRepository.save_band_ratios(out / "band_ratios.csv", ratios)
    ResultsRepository.save_json(out / "noise_benchmark.json", report)

    below = sum(r.ratio > 1 for r in ratios)
    if below < len(ratios):
        logger.warning("Quantum floor not below classical in %d of %d bands", len(ratios) - below, len(ratios))
    print(
        f"band {band}: amplitude ratio {report.amplitude_ratio:.4f}, variance ratio {report.variance_ratio:.4f}, "
        f"classical/SNL {report.classical_excess_over_snl:.4f}, "
        f"expected ratio {PhotonicsService.quantum_advantage_factor(quantum_sensor.eta_int, quantum_sensor.visibility):.4f}"
    )
    print(f"sub-shot-noise in {below}/{len(ratios)} bands; classical floor {report.classical_floor.amplitude:.4e} "
          f"+/- {report.classical_floor.uncertainty:.1e} rad/sqrt(Hz) (SNL {report.snl_floor:.4e})")