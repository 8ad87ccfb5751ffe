import argparse
from pathlib import Path

from app.commands.common import add_common_arguments, output_dir, resolve_config
from app.core.context import RunContext
from app.core.logging import get_logger
from app.repos.manifest_repo import ManifestRepository
from app.repos.srt_repo import SrtRepository
from app.schemas.sensor import Scheme
from app.services.srt_service import SrtService

NAME = "srt"


def register(subparsers: "argparse._SubParsersAction[argparse.ArgumentParser]") -> None:
    parser = subparsers.add_parser(NAME, help="paired SRT statistics (synthetic listeners or --input CSV)")
    add_common_arguments(parser)
    parser.add_argument(
        "--input",
        type=Path,
        default=None,
        help="CSV subject, srt_classical_db, srt_quantum_db (default: simulate listeners)",
    )
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, context: RunContext) -> None:
    logger = get_logger(__name__, context)
    config = resolve_config(args)
    stats_settings = config.stats
    out = output_dir(config)

    source = args.input or (Path(stats_settings.input_csv) if stats_settings.input_csv else None)
    if source is not None:
        results = SrtRepository.load(source)
        logger.info("Loaded %d subjects from %s", results.n, source)
    else:
        snr_classical, snr_quantum = stats_settings.snr_classical, stats_settings.snr_quantum
        if stats_settings.snr_fit_csv:
            fits = ManifestRepository.load_fits(Path(stats_settings.snr_fit_csv))
            snr_classical, snr_quantum = fits[Scheme.CLASSICAL], fits[Scheme.QUANTUM]
        results = SrtService.simulate_population(
            stats_settings.n_subjects, snr_classical, snr_quantum, stats_settings.listener, config.seed
        )
        expected = -(snr_quantum.beta - snr_classical.beta) / snr_classical.alpha
        logger.info("Expected population SRT shift %.2f dB_SPL", expected)

    paired = SrtService.paired_analysis(results)
    bins = SrtService.histogram(results, stats_settings.histogram_bin_width_db)
    extra: dict[str, float] = {"alpha": stats_settings.alpha}
    if stats_settings.power_replications:
        extra["power"] = SrtService.power_analysis(
            paired.mean_diff,
            paired.sd,
            paired.n,
            stats_settings.alpha,
            stats_settings.power_replications,
            config.seed,
        )

    SrtRepository.save_subjects(out / "srt_subjects.csv", results)
    SrtRepository.save_report(out / "srt_report.csv", paired, extra)
    SrtRepository.save_histogram(out / "srt_histogram.csv", bins)

    verdict = "rejected" if paired.p_value < stats_settings.alpha else "not rejected"
    print(f"n = {paired.n}")
    print(f"mean SRT difference (quantum - classical): {paired.mean_diff:+.2f} dB_SPL, 95% CI +/- {paired.ci95:.2f}")
    print(f"sd {paired.sd:.2f} dB_SPL, sem {paired.sem:.3f} dB_SPL")
    print(f"t = {paired.t_statistic:.3f}, p (one-sided) = {paired.p_value:.4f}, p (two-sided) = {paired.p_value_two_sided:.4f}")
    print(f"improved: {100 * paired.fraction_improved:.0f}% of subjects; 'no quantum advantage' {verdict} at alpha {stats_settings.alpha:g}")
    if "power" in extra:
        print(f"power at the observed effect: {extra['power']:.2f}")
