import argparse
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from app.commands.common import add_common_arguments, output_dir, resolve_config
from app.core.config import settings
from app.core.context import RunContext
from app.core.errors import ConfigError
from app.core.logging import get_logger
from app.repos.audio_repo import AudioRepository
from app.repos.manifest_repo import ManifestRepository
from app.repos.record_repo import DetectorRecordRepository
from app.schemas.audio import AudioSignal, BatchItem, BatchResult, SnrFit
from app.schemas.experiment import ExperimentConfig
from app.schemas.sensor import Scheme
from app.services.audio_service import AudioService
from app.utils.rng import derive_seed

RECORD = "record"
RECORD_BATCH = "record-batch"
STIMULUS_FILE = "stimulus.wav"


def register(subparsers: "argparse._SubParsersAction[argparse.ArgumentParser]") -> None:
    single = subparsers.add_parser(RECORD, help="record one WAV file through a simulated microphone")
    add_common_arguments(single)
    single.add_argument("--in", dest="input", type=Path, required=True, help="input WAV (mono)")
    single.add_argument("--scheme", type=Scheme, choices=list(Scheme), required=True)
    single.add_argument("--volume", type=float, required=True, help="playback volume in dB_SPL")
    single.add_argument("--out", type=Path, required=True, help="output WAV")
    single.add_argument(
        "--save-record", type=Path, default=None, help="also write the raw D+/D- counts to this CSV"
    )
    single.set_defaults(handler=run_record)

    batch = subparsers.add_parser(RECORD_BATCH, help="volume sweep, SNR per recording and SNR = alpha V + beta fits")
    add_common_arguments(batch)
    batch.add_argument(
        "--manifest",
        type=Path,
        default=None,
        help="CSV file, volume_db_spl, scheme, seed (default: synthetic 22-step sweep)",
    )
    batch.set_defaults(handler=run_batch)


def run_record(args: argparse.Namespace, context: RunContext) -> None:
    logger = get_logger(__name__, context)
    config = resolve_config(args)
    audio = AudioRepository.read(args.input)
    recorded, record = AudioService.record_with_counts(audio, args.volume, args.scheme, config, config.seed)
    AudioRepository.write(args.out, recorded)
    if args.save_record is not None:
        DetectorRecordRepository.save(args.save_record, record)
        logger.info("Saved %d detector bins to %s", len(record), args.save_record)

    snr = AudioService.snr_measure(audio, recorded)
    logger.info("Recorded %s (%s, %.1f dB_SPL) -> %s", args.input, args.scheme.value, args.volume, args.out)
    print(f"{args.out}: {args.scheme.value} at {args.volume:g} dB_SPL, SNR {snr:.2f} dB")


def _synthetic_manifest(config: ExperimentConfig, wav_dir: Path) -> tuple[list[BatchItem], Path]:
    audio_settings = config.audio
    stimulus = AudioService.synthesize_speech_like(
        audio_settings.stimulus_duration_s,
        audio_settings.sample_rate_hz,
        derive_seed(config.seed, 0),
        audio_settings.stimulus_peak,
    )
    AudioRepository.write(wav_dir / STIMULUS_FILE, stimulus)
    volumes = AudioService.volume_grid(
        audio_settings.volume_start_db_spl, audio_settings.volume_step_db, audio_settings.volume_steps
    )
    items = [
        BatchItem(
            file=STIMULUS_FILE,
            volume_db_spl=float(volume),
            scheme=scheme,
            seed=derive_seed(config.seed, 1 + s, step),
        )
        for s, scheme in enumerate(Scheme)
        for step, volume in enumerate(volumes)
    ]
    return items, wav_dir


def _output_name(item: BatchItem) -> str:
    return f"{Path(item.file).stem}_{item.scheme.value}_{item.volume_db_spl:g}dB_s{item.seed}.wav"


def run_batch(args: argparse.Namespace, context: RunContext) -> None:
    logger = get_logger(__name__, context)
    config = resolve_config(args)
    out = output_dir(config)
    wav_dir = out / config.audio.wav_dir

    manifest = args.manifest or (Path(config.audio.manifest) if config.audio.manifest else None)
    if manifest is None:
        items, source_dir = _synthetic_manifest(config, wav_dir)
        ManifestRepository.save(out / "manifest.csv", items)
        logger.info("No manifest given; synthesised a %d-item sweep", len(items))
    else:
        items = ManifestRepository.load(manifest)
        source_dir = manifest.parent
    if not items:
        raise ConfigError("manifest contains no recordings")

    sources: dict[str, AudioSignal] = {}
    for item in items:
        if item.file not in sources:
            sources[item.file] = AudioRepository.read(source_dir / item.file)

    def record(item: BatchItem) -> BatchResult:
        clean = sources[item.file]
        recorded = AudioService.record_through_microphone(clean, item.volume_db_spl, item.scheme, config, item.seed)
        AudioRepository.write(wav_dir / _output_name(item), recorded)
        return BatchResult(
            file=item.file,
            scheme=item.scheme,
            volume=item.volume_db_spl,
            snr_db=AudioService.snr_measure(clean, recorded),
        )

    if settings.MAX_WORKERS > 1:
        with ThreadPoolExecutor(max_workers=settings.MAX_WORKERS) as pool:
            results = list(pool.map(record, items))
    else:
        results = [record(item) for item in items]
    ManifestRepository.save_results(out / "snr_results.csv", results)

    fits: dict[Scheme, SnrFit] = {}
    for scheme in Scheme:
        points = [(r.volume, r.snr_db) for r in results if r.scheme == scheme]
        if len(points) < 3:
            logger.warning("Only %d %s recordings; no SNR fit", len(points), scheme.value)
            continue
        fits[scheme] = AudioService.fit_snr_vs_volume(points)
    if fits:
        ManifestRepository.save_fits(out / "snr_fit.csv", fits)

    print(f"{len(results)} recordings -> {wav_dir}")
    for scheme, fit in fits.items():
        print(
            f"{scheme.value:>9}: alpha {fit.alpha:.3f} +/- {fit.alpha_stderr:.3f}, "
            f"beta {fit.beta:.2f} +/- {fit.beta_stderr:.2f} dB, rms residual {fit.residual:.2f} dB"
        )
    if len(fits) == 2:
        print(f"beta_q - beta_c = {fits[Scheme.QUANTUM].beta - fits[Scheme.CLASSICAL].beta:.2f} dB")
