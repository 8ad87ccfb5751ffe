from __future__ import annotations

import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
import numpy as np
from scipy import optimize, special, stats

from app.core.config import settings
from app.core.errors import DomainError, PsychometricFitError
from app.core.logging import get_logger
from app.schemas.audio import SnrFit
from app.schemas.detection import FloatArray
from app.schemas.experiment import ListenerSettings
from app.schemas.srt import (
    FitMeta,
    HistogramBin,
    PairedStats,
    PsychometricFit,
    SrtResult,
    SubjectSrt,
    Trial,
)
from app.utils.rng import derive_seed, substream

logger = get_logger(__name__)

MIN_DISTINCT_VOLUMES = 4


def _negative_log_likelihood(
    theta: FloatArray, volumes: FloatArray, successes: FloatArray, counts: FloatArray
) -> float:
    eta = theta[0] + theta[1] * volumes
    return float(np.sum(counts * np.logaddexp(0.0, eta) - successes * eta))


def _gradient(theta: FloatArray, volumes: FloatArray, successes: FloatArray, counts: FloatArray) -> FloatArray:
    residual = counts * special.expit(theta[0] + theta[1] * volumes) - successes
    return np.array([np.sum(residual), np.sum(residual * volumes)])


def _hessian(theta: FloatArray, volumes: FloatArray, successes: FloatArray, counts: FloatArray) -> FloatArray:
    p = special.expit(theta[0] + theta[1] * volumes)
    w = counts * p * (1 - p)
    return np.array(
        [
            [np.sum(w), np.sum(w * volumes)],
            [np.sum(w * volumes), np.sum(w * volumes ** 2)],
        ]
    )


def _initial_guess(volumes: FloatArray, successes: FloatArray, counts: FloatArray) -> FloatArray:
    # empirical logits with a half-count correction, straight line
    logits = np.log((successes + 0.5) / (counts - successes + 0.5))
    slope, intercept = np.polyfit(volumes, logits, 1)
    if slope <= 0:
        slope = 0.1
        intercept = -slope * float(np.average(volumes, weights=counts))
    return np.array([intercept, slope], dtype=np.float64)


class SrtService:
    """Psychometric fits, synthetic listeners and paired SRT statistics."""

    @staticmethod
    def logistic(volumes: FloatArray | float, srt: float, slope: float) -> FloatArray:
        return special.expit(slope * (np.asarray(volumes, dtype=np.float64) - srt))

    @staticmethod
    # Binomial MLE of P(V) = 1 / (1 + exp(-slope (V - SRT)))
    def fit_psychometric(trials: Sequence[Trial]) -> PsychometricFit:
        volumes = np.array([t.volume_db_spl for t in trials], dtype=np.float64)
        counts = np.array([t.word_count for t in trials], dtype=np.float64)
        fractions = np.array([t.fraction_correct for t in trials], dtype=np.float64)
        successes = fractions * counts

        distinct = int(np.unique(volumes).size)
        if distinct < MIN_DISTINCT_VOLUMES:
            raise DomainError(
                f"psychometric fit needs at least {MIN_DISTINCT_VOLUMES} distinct volumes, got {distinct}",
                details={"distinct_volumes": distinct},
            )
        if np.all(fractions == 0) or np.all(fractions == 1):
            raise PsychometricFitError(
                "all-0 or all-1 data has no 50% point",
                details={"fraction": float(fractions[0])},
            )
        binary = np.all((fractions == 0) | (fractions == 1))
        if binary and volumes[fractions == 0].max() < volumes[fractions == 1].min():
            raise PsychometricFitError("perfectly separated data: slope diverges")

        args = (volumes, successes, counts)
        result = optimize.minimize(
            _negative_log_likelihood,
            _initial_guess(*args),
            args=args,
            jac=_gradient,
            hess=_hessian,
            method="trust-exact",
            options={"gtol": 1e-10, "maxiter": 200},
        )
        intercept, slope = (float(v) for v in result.x)
        if not result.success or not np.all(np.isfinite(result.x)):
            raise PsychometricFitError(
                f"psychometric fit did not converge: {result.message}",
                details={"iterations": int(result.nit)},
            )
        if slope <= 0:
            raise PsychometricFitError(
                "fitted slope is not positive (success does not increase with volume)",
                details={"slope": slope},
            )

        srt = -intercept / slope
        fitted = SrtService.logistic(volumes, srt, slope)
        return PsychometricFit(
            srt=srt,
            slope=slope,
            fit_meta=FitMeta(
                iterations=int(result.nit),
                converged=True,
                residual=float(np.sqrt(np.mean((fractions - fitted) ** 2))),
                log_likelihood=-float(result.fun),
            ),
        )

    @staticmethod
    def simulate_listener(
        intelligibility_ref_snr: float,
        snr_model: SnrFit,
        volumes: Sequence[float] | FloatArray,
        seed: int,
        slope_per_db: float = 0.6,
        words_per_volume: int = 25,
    ) -> list[Trial]:
        """Word success is logistic in SNR(V) - reference SNR; word outcomes are binomial."""
        if words_per_volume < 1:
            raise DomainError("words_per_volume must be >= 1")
        grid = np.asarray(volumes, dtype=np.float64)
        snr = snr_model.alpha * grid + snr_model.beta
        p = SrtService.logistic(snr, intelligibility_ref_snr, slope_per_db)
        correct = substream(seed, 0).binomial(words_per_volume, p)
        return [
            Trial(volume_db_spl=float(v), fraction_correct=float(k) / words_per_volume, word_count=words_per_volume)
            for v, k in zip(grid, correct)
        ]

    @staticmethod
    def population_volume_grid(snr_model: SnrFit, listener: ListenerSettings) -> FloatArray:
        """Fixed grid centred on the population SRT the model predicts."""
        center = (listener.ref_snr_mean_db - snr_model.beta) / snr_model.alpha
        half = listener.volume_span_db / 2
        return np.linspace(center - half, center + half, listener.volume_points)

    @staticmethod
    def simulate_population(
        n: int,
        snr_classical: SnrFit,
        snr_quantum: SnrFit,
        listener: ListenerSettings,
        seed: int,
        max_workers: int | None = None,
    ) -> SrtResult:
        """
        n synthetic listeners, each tested once per microphone on the same grid.
        Subject i draws its reference SNR from substream (seed, i); each session
        adds its own test-retest offset.
        """
        if n < 1:
            raise DomainError("population needs n >= 1", details={"n": n})
        volumes = SrtService.population_volume_grid(snr_classical, listener)
        words = listener.sentences * listener.words_per_sentence // listener.volume_points

        def subject(index: int) -> SubjectSrt:
            rng = substream(seed, index)
            ref = listener.ref_snr_mean_db + listener.ref_snr_sd_db * rng.standard_normal()
            srts: list[float] = []
            for session, model in enumerate((snr_classical, snr_quantum)):
                session_ref = ref + listener.session_sd_db * rng.standard_normal()
                trials = SrtService.simulate_listener(
                    session_ref,
                    model,
                    volumes,
                    derive_seed(seed, index, session + 1),
                    slope_per_db=listener.slope_per_db,
                    words_per_volume=words,
                )
                srts.append(SrtService.fit_psychometric(trials).srt)
            return SubjectSrt(subject=f"S{index + 1:02d}", srt_classical=srts[0], srt_quantum=srts[1])

        workers = max_workers if max_workers is not None else settings.MAX_WORKERS
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                subjects = list(pool.map(subject, range(n)))
        else:
            subjects = [subject(i) for i in range(n)]

        logger.info("Simulated %d listeners on %d volumes x %d words", n, volumes.size, words)
        return SrtResult.from_subjects(subjects)

    @staticmethod
    def synthesize_differences(mean: float, sd: float, n: int, seed: int) -> FloatArray:
        """Gaussian sample rescaled to exactly the requested sample mean and sd (ddof=1)."""
        if n < 2:
            raise DomainError("n must be >= 2", details={"n": n})
        if sd < 0:
            raise DomainError("sd must be >= 0", details={"sd": sd})
        z = substream(seed, 0).standard_normal(n)
        z = (z - z.mean()) / z.std(ddof=1)
        return mean + sd * z

    @staticmethod
    def student_t_cdf(t: FloatArray | float, df: float) -> FloatArray:
        """Student-t CDF through the regularized incomplete beta function."""
        if not df > 0:
            raise DomainError("degrees of freedom must be > 0", details={"df": df})
        t_arr = np.asarray(t, dtype=np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            x = np.where(np.isinf(t_arr), 0.0, df / (df + t_arr ** 2))
        tail = 0.5 * special.betainc(df / 2, 0.5, x)
        return np.where(t_arr < 0, tail, 1 - tail)

    @staticmethod
    def paired_analysis(results: SrtResult) -> PairedStats:
        """One-sample t-test of d = srt_quantum - srt_classical against 0 (H1: mean < 0)."""
        if results.n < 2:
            raise DomainError("paired analysis requires n >= 2", details={"n": results.n})
        d = np.asarray(results.differences(), dtype=np.float64)
        n = d.size
        df = n - 1
        mean = float(np.mean(d))
        sd = float(np.std(d, ddof=1))
        sem = sd / math.sqrt(n)
        ci95 = float(stats.t.ppf(0.975, df)) * sem

        if sem > 0:
            t_stat = mean / sem
        elif mean == 0:
            t_stat = 0.0
        else:
            t_stat = math.copysign(math.inf, mean)

        p_one = float(SrtService.student_t_cdf(t_stat, df))
        p_two = min(1.0, 2 * min(p_one, 1 - p_one))
        return PairedStats(
            n=n,
            mean_diff=mean,
            sd=sd,
            sem=sem,
            ci95=ci95,
            t_statistic=t_stat,
            p_value=p_one,
            p_value_two_sided=p_two,
            fraction_improved=float(np.mean(d < 0)),
        )

    @staticmethod
    # Bins [k w, (k+1) w), edges aligned to 0; empty inner bins kept
    def histogram(results: SrtResult, bin_width: float) -> list[HistogramBin]:
        if not bin_width > 0:
            raise DomainError("bin width must be > 0", details={"bin_width": bin_width})
        d = np.asarray(results.differences(), dtype=np.float64)
        if d.size == 0:
            return []
        # values on an edge belong to the upper bin despite float round-off
        index = np.floor(np.round(d / bin_width, 9)).astype(np.int64)
        first = int(index.min())
        counts = np.bincount(index - first)
        return [
            HistogramBin(
                left=(first + k) * bin_width,
                right=(first + k + 1) * bin_width,
                count=int(c),
            )
            for k, c in enumerate(counts)
        ]

    @staticmethod
    def power_analysis(
        effect: float, sd: float, n: int, alpha: float, replications: int, seed: int
    ) -> float:
        """Monte Carlo rejection rate of the one-sided paired t-test."""
        if n < 2 or replications < 1:
            raise DomainError("power analysis needs n >= 2 and replications >= 1")
        if not 0 < alpha < 1:
            raise DomainError("alpha must be in (0, 1)", details={"alpha": alpha})
        samples = substream(seed, 0).normal(effect, sd, size=(replications, n))
        means = samples.mean(axis=1)
        sems = samples.std(axis=1, ddof=1) / math.sqrt(n)
        p = SrtService.student_t_cdf(means / sems, n - 1)
        return float(np.mean(p < alpha))
