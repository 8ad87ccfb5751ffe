import json
import re
import shutil
from pathlib import Path
import pytest

from app.main import build_parser, main
from app.repos import AudioRepository, DetectorRecordRepository, ManifestRepository
from app.schemas.sensor import Scheme
from app.services.audio_service import AudioService

NOISE_FILES = [
    "spectrum_classical.csv",
    "spectrum_quantum.csv",
    "noise_spectra.csv",
    "band_ratios.csv",
    "noise_benchmark.json",
]


def _envelope(err: str) -> dict:
    lines = [line for line in err.splitlines() if line.startswith('{"error"')]
    assert len(lines) == 1
    return json.loads(lines[0])


@pytest.mark.cli
@pytest.mark.integration
class TestCommands:
    """Each subcommand end to end on the scaled-down experiment."""

    def test_parser_lists_commands(self):
        help_text = build_parser().format_help()
        for name in ("fringe-sweep", "noise-benchmark", "record", "record-batch", "srt"):
            assert name in help_text

    def test_fringe_sweep(self, config_file, small_config, capsys):
        assert main(["fringe-sweep", "--config", str(config_file)]) == 0
        out = Path(small_config.output_dir)
        lines = (out / "fringe_sweep.csv").read_text(encoding="utf-8").splitlines()
        assert len(lines) == small_config.sweep.steps + 1
        ratio = float(re.search(r"ratio (\S+)", capsys.readouterr().out).group(1))
        assert ratio == pytest.approx(2.0, rel=1e-3)

    def test_noise_benchmark(self, config_file, small_config, capsys):
        assert main(["noise-benchmark", "--config", str(config_file)]) == 0
        out = Path(small_config.output_dir)
        for name in NOISE_FILES:
            assert (out / name).is_file()
        report = json.loads((out / "noise_benchmark.json").read_text(encoding="utf-8"))
        assert 1.05 < report["amplitude_ratio"] < 1.20
        assert "amplitude ratio" in capsys.readouterr().out

    def test_noise_benchmark_is_reproducible(self, config_file, tmp_path):
        """Same seed, same bytes."""
        first, second = tmp_path / "first", tmp_path / "second"
        assert main(["noise-benchmark", "--config", str(config_file), "--out-dir", str(first)]) == 0
        assert main(["noise-benchmark", "--config", str(config_file), "--out-dir", str(second)]) == 0
        for name in NOISE_FILES:
            assert (first / name).read_bytes() == (second / name).read_bytes()

    def test_seed_override_changes_output(self, config_file, tmp_path):
        first, second = tmp_path / "first", tmp_path / "second"
        assert main(["noise-benchmark", "--config", str(config_file), "--out-dir", str(first)]) == 0
        assert main(
            ["noise-benchmark", "--config", str(config_file), "--out-dir", str(second), "--seed", "99"]
        ) == 0
        assert (first / "spectrum_classical.csv").read_bytes() != (second / "spectrum_classical.csv").read_bytes()

    def test_noise_benchmark_from_saved_records(self, config_file, small_config, tmp_path):
        """Saved detector counts reproduce the simulated benchmark byte for byte."""
        records, first, second = tmp_path / "records", tmp_path / "first", tmp_path / "second"
        assert main(
            ["noise-benchmark", "--config", str(config_file), "--out-dir", str(first), "--save-records", str(records)]
        ) == 0
        saved = DetectorRecordRepository.load(records / "record_quantum.csv")
        assert len(saved) == small_config.detection.n_bins
        assert saved.config_snapshot == small_config.sensors.quantum

        assert main(
            ["noise-benchmark", "--config", str(config_file), "--out-dir", str(second), "--from-records", str(records)]
        ) == 0
        for name in NOISE_FILES:
            assert (first / name).read_bytes() == (second / name).read_bytes()

    def test_noise_benchmark_from_saved_spectra(self, config_file, tmp_path):
        """The enhancement report can be rebuilt from the written spectra alone."""
        first, second = tmp_path / "first", tmp_path / "second"
        assert main(["noise-benchmark", "--config", str(config_file), "--out-dir", str(first)]) == 0
        assert main(
            ["noise-benchmark", "--config", str(config_file), "--out-dir", str(second), "--from-spectra", str(first)]
        ) == 0
        original = json.loads((first / "noise_benchmark.json").read_text(encoding="utf-8"))
        rebuilt = json.loads((second / "noise_benchmark.json").read_text(encoding="utf-8"))
        assert rebuilt["amplitude_ratio"] == pytest.approx(original["amplitude_ratio"], rel=1e-8)
        assert (second / "band_ratios.csv").is_file()
        assert not (second / "spectrum_classical.csv").exists()

    def test_record_sources_are_exclusive(self, config_file, tmp_path):
        with pytest.raises(SystemExit):
            main(
                [
                    "noise-benchmark",
                    "--config", str(config_file),
                    "--from-records", str(tmp_path),
                    "--from-spectra", str(tmp_path),
                ]
            )

    def test_record(self, config_file, tmp_path, capsys):
        source = AudioRepository.write(
            tmp_path / "tone.wav", AudioService.synthesize_tone(440.0, 0.2, 20_000.0, 0.5)
        )
        target = tmp_path / "recorded" / "tone_quantum.wav"
        code = main(
            [
                "record",
                "--config", str(config_file),
                "--in", str(source),
                "--scheme", "quantum",
                "--volume", "60",
                "--out", str(target),
            ]
        )
        assert code == 0
        recorded = AudioRepository.read(target)
        assert len(recorded) == 4000
        assert "SNR" in capsys.readouterr().out

    def test_record_saves_detector_counts(self, config_file, tmp_path):
        source = AudioRepository.write(
            tmp_path / "tone.wav", AudioService.synthesize_tone(440.0, 0.1, 20_000.0, 0.5)
        )
        counts = tmp_path / "counts" / "tone.csv"
        code = main(
            [
                "record",
                "--config", str(config_file),
                "--in", str(source),
                "--scheme", "classical",
                "--volume", "60",
                "--out", str(tmp_path / "tone_rec.wav"),
                "--save-record", str(counts),
            ]
        )
        assert code == 0
        record = DetectorRecordRepository.load(counts)
        assert len(record) == 2000
        assert record.sample_rate == 20_000.0
        assert record.config_snapshot.scheme == Scheme.CLASSICAL

    def test_record_batch(self, config_file, small_config, capsys):
        assert main(["record-batch", "--config", str(config_file)]) == 0
        out = Path(small_config.output_dir)
        assert (out / "wav" / "stimulus.wav").is_file()
        assert len(ManifestRepository.load(out / "manifest.csv")) == 2 * small_config.audio.volume_steps
        assert len(list((out / "wav").glob("stimulus_*dB_s*.wav"))) == 2 * small_config.audio.volume_steps
        fits = ManifestRepository.load_fits(out / "snr_fit.csv")
        assert len(fits) == 2
        assert "beta_q - beta_c" in capsys.readouterr().out

    def test_record_batch_with_manifest(self, config_file, tmp_path):
        AudioRepository.write(tmp_path / "a.wav", AudioService.synthesize_tone(300.0, 0.2, 20_000.0, 0.5))
        manifest = tmp_path / "manifest.csv"
        rows = ["file,volume_db_spl,scheme,seed"] + [f"a.wav,{50 + k},classical,{k}" for k in range(3)]
        _ = manifest.write_text("\n".join(rows) + "\n", encoding="utf-8")
        out = tmp_path / "batch"

        code = main(["record-batch", "--config", str(config_file), "--manifest", str(manifest), "--out-dir", str(out)])

        assert code == 0
        results = (out / "snr_results.csv").read_text(encoding="utf-8").splitlines()
        assert len(results) == 4

    def test_record_batch_keeps_every_seed(self, config_file, tmp_path):
        """Same file, scheme and volume with two seeds: two recordings on disk."""
        AudioRepository.write(tmp_path / "a.wav", AudioService.synthesize_tone(300.0, 0.1, 20_000.0, 0.5))
        manifest = tmp_path / "manifest.csv"
        _ = manifest.write_text(
            "file,volume_db_spl,scheme,seed\na.wav,55,classical,1\na.wav,55,classical,2\n", encoding="utf-8"
        )
        out = tmp_path / "batch"

        code = main(["record-batch", "--config", str(config_file), "--manifest", str(manifest), "--out-dir", str(out)])

        assert code == 0
        names = sorted(p.name for p in (out / "wav").glob("a_*.wav"))
        assert names == ["a_classical_55dB_s1.wav", "a_classical_55dB_s2.wav"]
        assert AudioRepository.read(out / "wav" / names[0]).samples.tolist() != (
            AudioRepository.read(out / "wav" / names[1]).samples.tolist()
        )

    def test_srt_simulated(self, config_file, small_config, capsys):
        assert main(["srt", "--config", str(config_file)]) == 0
        out = Path(small_config.output_dir)
        subjects = (out / "srt_subjects.csv").read_text(encoding="utf-8").splitlines()
        assert len(subjects) == small_config.stats.n_subjects + 1
        assert (out / "srt_report.csv").is_file()
        assert (out / "srt_histogram.csv").is_file()
        assert "p (one-sided)" in capsys.readouterr().out

    def test_srt_from_input(self, config_file, tmp_path, capsys):
        source = tmp_path / "subjects.csv"
        _ = source.write_text(
            "subject,srt_classical_db,srt_quantum_db\n"
            "01,-14.0,-15.0\n02,-13.0,-13.5\n03,-15.0,-14.5\n04,-14.2,-15.4\n",
            encoding="utf-8",
        )
        out = tmp_path / "stats"
        assert main(["srt", "--config", str(config_file), "--input", str(source), "--out-dir", str(out)]) == 0
        assert "n = 4" in capsys.readouterr().out


@pytest.mark.cli
class TestFailures:
    """Exit codes and the stderr error envelope."""

    def test_missing_config(self, tmp_path, capsys):
        code = main(["fringe-sweep", "--config", str(tmp_path / "absent.json")])
        assert code == 2
        envelope = _envelope(capsys.readouterr().err)
        assert envelope["error"]["type"] == "config_error"
        assert envelope["meta"]["command"] == "fringe-sweep"

    def test_invalid_config(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        _ = path.write_text(json.dumps({"sensors": {"quantum": {"scheme": "quantum", "visibility": 1.5}}}), encoding="utf-8")
        code = main(["fringe-sweep", "--config", str(path)])
        assert code == 2
        envelope = _envelope(capsys.readouterr().err)
        assert envelope["error"]["type"] == "validation_error"
        assert "sensors.quantum.visibility" in envelope["error"]["message"]

    def test_missing_input_file(self, config_file, tmp_path, capsys):
        code = main(["srt", "--config", str(config_file), "--input", str(tmp_path / "absent.csv")])
        assert code == 2
        assert _envelope(capsys.readouterr().err)["error"]["type"] == "file_not_found"

    def test_bad_input_columns(self, config_file, tmp_path, capsys):
        source = tmp_path / "subjects.csv"
        _ = source.write_text("subject,srt\n01,-14.0\n", encoding="utf-8")
        code = main(["srt", "--config", str(config_file), "--input", str(source)])
        assert code == 2
        assert _envelope(capsys.readouterr().err)["error"]["type"] == "config_error"

    def test_seed_reaches_meta(self, tmp_path, capsys):
        code = main(["srt", "--config", str(tmp_path / "absent.json"), "--seed", "5"])
        assert code == 2
        assert _envelope(capsys.readouterr().err)["meta"]["seed"] == 5

    def test_unknown_command(self):
        with pytest.raises(SystemExit) as info:
            main(["calibrate"])
        assert info.value.code == 2

    def test_bad_scheme_argument(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["record", "--in", "x.wav", "--scheme", "squeezed", "--volume", "60", "--out", str(tmp_path / "y.wav")])

    def test_record_of_the_wrong_scheme(self, config_file, tmp_path, capsys):
        """A classical record in the quantum slot is a config error."""
        records = tmp_path / "records"
        assert main(
            ["noise-benchmark", "--config", str(config_file), "--out-dir", str(tmp_path / "a"), "--save-records", str(records)]
        ) == 0
        _ = capsys.readouterr()
        shutil.copyfile(records / "record_classical.csv", records / "record_quantum.csv")
        code = main(["noise-benchmark", "--config", str(config_file), "--from-records", str(records)])
        assert code == 2
        assert _envelope(capsys.readouterr().err)["error"]["type"] == "config_error"

    def test_missing_spectra(self, config_file, tmp_path, capsys):
        code = main(["noise-benchmark", "--config", str(config_file), "--from-spectra", str(tmp_path / "none")])
        assert code == 2
        assert _envelope(capsys.readouterr().err)["error"]["type"] == "file_not_found"
